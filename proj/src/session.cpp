#include "hippo/session.hpp"

#include <atomic>
#include <charconv>
#include <set>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace hippo {

using nlohmann::json;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

std::string_view to_string(MessageKind k) {
  switch (k) {
    case MessageKind::StateUpdate: return "state_update";
    case MessageKind::InterventionBegin: return "intervention_begin";
    case MessageKind::InterventionEnd: return "intervention_end";
    case MessageKind::HumanAction: return "human_action";
    case MessageKind::EpisodeEnd: return "episode_end";
    case MessageKind::Heartbeat: return "heartbeat";
  }
  return "?";
}

std::optional<MessageKind> parse_message_kind(std::string_view s) {
  for (auto k : {MessageKind::StateUpdate, MessageKind::InterventionBegin,
                 MessageKind::InterventionEnd, MessageKind::HumanAction, MessageKind::EpisodeEnd,
                 MessageKind::Heartbeat}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::string encode_message(const SessionMessage& m) {
  return json{{"kind", std::string(to_string(m.kind))}, {"seq", m.seq}, {"payload", m.payload}}
      .dump();
}

std::optional<SessionMessage> decode_message(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("session message is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw Error("session message without a kind");
  }
  if (!j.contains("seq") || !j["seq"].is_number_unsigned()) {
    throw Error("session message without a sequence number");
  }
  const auto kind = parse_message_kind(j["kind"].get<std::string>());
  if (!kind) return std::nullopt;
  SessionMessage m;
  m.kind = *kind;
  m.seq = j["seq"].get<std::uint64_t>();
  if (j.contains("payload")) m.payload = j["payload"];
  if (m.kind == MessageKind::HumanAction) {
    const json& a = m.payload.is_object() && m.payload.contains("action") ? m.payload["action"]
                                                                           : json();
    if (!a.is_number_integer() || a.get<long long>() < 0 || a.get<long long>() >= kActionCount) {
      throw Error("human_action payload must carry an action index in 0..5");
    }
  }
  return m;
}

SessionMessage human_action_message(Action a, std::uint64_t seq) {
  return {MessageKind::HumanAction, seq, json{{"action", to_index(a)}}};
}

void SessionMetrics::add(const StepRecord& r) {
  ++steps;
  collisions += r.collided ? 1 : 0;
  proximity += r.below_threshold ? 1 : 0;
  path_error_sum += r.path_error;
}

double SessionMetrics::security() const {
  if (steps == 0) return 1.0;
  return hippo::security(SecurityCounts{steps, proximity, collisions});
}

json state_payload(const StepEvent& ev, const SessionMetrics& metrics) {
  const StepRecord& r = ev.record;
  const ScopeState& s = ev.scope;
  json rays = json::array();
  json waypoint = nullptr;
  if (ev.observation) {
    rays = ev.observation->ray_depths;
    waypoint = {{"direction", json::array({ev.observation->waypoint_dir.x(),
                                           ev.observation->waypoint_dir.y(),
                                           ev.observation->waypoint_dir.z()})},
                {"distance", ev.observation->waypoint_dist}};
  }
  json trail = json::array();
  for (const auto& p : s.trail) trail.push_back(json::array({p.x(), p.y(), p.z()}));
  return {{"episode", ev.episode},
          {"step", r.step},
          {"tip",
           {{"position", json::array({s.tip_position.x(), s.tip_position.y(), s.tip_position.z()})},
            {"heading", json::array({s.tip_heading.x(), s.tip_heading.y(), s.tip_heading.z()})}}},
          {"depth", s.insertion_depth},
          {"total_length", ev.env.model.total_length()},
          {"segment", r.segment},
          {"bend",
           {{"up", s.bend_angles[0]},
            {"down", s.bend_angles[1]},
            {"left", s.bend_angles[2]},
            {"right", s.bend_angles[3]}}},
          {"rays", rays},
          {"waypoint", waypoint},
          {"waypoints_reached", waypoints_reached(ev.env.model, s.furthest_depth)},
          {"waypoints_total", ev.env.model.waypoints().size()},
          {"wall_distance", r.wall_distance},
          {"below_threshold", r.below_threshold},
          {"collided", r.collided},
          {"m", r.intervened},
          {"action", r.action},
          {"reward", r.reward},
          {"trail", trail},
          {"metrics",
           {{"steps", metrics.steps},
            {"collisions", metrics.collisions},
            {"proximity_events", metrics.proximity},
            {"ate", metrics.ate()},
            {"security", metrics.security()}}}};
}

json episode_end_payload(const EpisodeLog& log) {
  json out = {{"episode", log.episode},
              {"steps", log.steps.size()},
              {"termination", log.termination},
              {"reached_goal", log.reached_goal}};
  if (!log.steps.empty()) {
    std::vector<double> errors;
    for (const auto& s : log.steps) errors.push_back(s.path_error);
    out["ate"] = mean_std(errors).mean;
    out["security"] = security(log);
  }
  return out;
}

void SessionHub::publish_state(json payload) {
  std::lock_guard lock(mutex_);
  latest_state_ = std::move(payload);
}

void SessionHub::publish_event(MessageKind kind, json payload) {
  std::function<void()> wake;
  {
    std::lock_guard lock(mutex_);
    events_.push_back({kind, 0, std::move(payload)});
    wake = wake_;
  }
  if (wake) wake();
}

std::vector<SessionHub::Inbound> SessionHub::drain_inbound() {
  std::lock_guard lock(mutex_);
  std::vector<Inbound> out(std::make_move_iterator(inbound_.begin()),
                           std::make_move_iterator(inbound_.end()));
  inbound_.clear();
  return out;
}

bool SessionHub::wait_inbound(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  return inbound_cv_.wait_for(lock, timeout, [&] { return !inbound_.empty(); });
}

bool SessionHub::has_clients() const {
  std::lock_guard lock(mutex_);
  return clients_ > 0;
}

void SessionHub::push_inbound(Inbound in) {
  {
    std::lock_guard lock(mutex_);
    inbound_.push_back(std::move(in));
  }
  inbound_cv_.notify_all();
}

std::optional<json> SessionHub::take_state() {
  std::lock_guard lock(mutex_);
  std::optional<json> out = std::move(latest_state_);
  latest_state_.reset();
  return out;
}

std::vector<SessionMessage> SessionHub::take_events() {
  std::lock_guard lock(mutex_);
  std::vector<SessionMessage> out = std::move(events_);
  events_.clear();
  return out;
}

void SessionHub::set_client_count(std::size_t n) {
  std::lock_guard lock(mutex_);
  clients_ = n;
}

void SessionHub::set_wakeup(std::function<void()> wake) {
  std::lock_guard lock(mutex_);
  wake_ = std::move(wake);
}

void RemoteHumanSource::reset_episode(std::size_t episode) {
  episode_ = episode;
  // A takeover spans episode boundaries only if the operator keeps it.
  held_.reset();
  repeats_ = 0;
}

void RemoteHumanSource::end(const char* reason) {
  if (!active_) return;
  active_ = false;
  held_.reset();
  repeats_ = 0;
  hub_.publish_event(MessageKind::InterventionEnd, json{{"reason", reason}});
}

void RemoteHumanSource::process(const std::vector<SessionHub::Inbound>& events,
                                std::optional<Action>& fresh) {
  for (const auto& ev : events) {
    if (ev.type == SessionHub::Inbound::Type::Disconnect) {
      fresh.reset();
      end("disconnect");
      continue;
    }
    switch (ev.message.kind) {
      case MessageKind::InterventionBegin:
        if (!active_) {
          active_ = true;
          held_.reset();
          repeats_ = 0;
          hub_.publish_event(MessageKind::InterventionBegin, json{{"reason", "operator"}});
        }
        break;
      case MessageKind::InterventionEnd:
        fresh.reset();
        end("operator");
        break;
      case MessageKind::HumanAction:
        if (active_) fresh = action_from_index(ev.message.payload.at("action").get<int>());
        break;
      default:
        break;
    }
  }
}

InterventionState RemoteHumanSource::begin_step(const StepContext& ctx) {
  std::optional<Action> fresh;
  process(hub_.drain_inbound(), fresh);
  if (active_ && !fresh) {
    const auto until = std::chrono::steady_clock::now() + deadline_;
    while (active_ && !fresh) {
      const auto left = std::chrono::ceil<std::chrono::milliseconds>(
          until - std::chrono::steady_clock::now());
      if (left.count() <= 0 || !hub_.wait_inbound(left)) break;
      process(hub_.drain_inbound(), fresh);
    }
  }

  InterventionState iv;
  iv.source = InterventionSourceKind::RemoteHuman;
  if (active_) {
    if (fresh) {
      held_ = fresh;
      repeats_ = 0;
      iv.pending_human_action = fresh;
    } else if (held_ && repeats_ < hi_.human_hold_steps) {
      ++repeats_;
      iv.pending_human_action = held_;
    } else {
      end("timeout");
    }
  }
  iv.active = active_;
  if (iv.active) recorded_[{episode_, ctx.episode_step}] = *iv.pending_human_action;
  return iv;
}

std::pair<std::string, unsigned short> parse_listen_address(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size()) {
    throw Error("listen address must look like host:port, got '" + s + "'");
  }
  unsigned port = 0;
  const char* first = s.data() + colon + 1;
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, port);
  if (res.ec != std::errc() || res.ptr != last || port > 65535) {
    throw Error("bad port in listen address '" + s + "'");
  }
  return {s.substr(0, colon), static_cast<unsigned short>(port)};
}

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, SessionHub& hub, std::function<void(WsSession*)> on_close)
      : ws_(std::move(socket)), hub_(hub), on_close_(std::move(on_close)) {}

  void start(std::function<void(std::shared_ptr<WsSession>)> on_open) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this(), on_open](beast::error_code ec) {
      if (ec) return;
      self->open_ = true;
      on_open(self);
      self->read();
    });
  }

  void send(std::string text) {
    if (!open_) return;
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) write_next();
  }

  void close() {
    if (!open_) return;
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      try {
        if (auto m = decode_message(text)) {
          self->hub_.push_inbound({SessionHub::Inbound::Type::Message, std::move(*m)});
        }
      } catch (const Error&) {
        // Malformed frames are dropped; the session stays up.
      }
      self->read();
    });
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(asio::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->closed();
                        return;
                      }
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->write_next();
                    });
  }

  void closed() {
    if (!open_) return;
    open_ = false;
    queue_.clear();
    on_close_(this);
  }

  websocket::stream<beast::tcp_stream> ws_;
  SessionHub& hub_;
  std::function<void(WsSession*)> on_close_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool open_ = false;
};

}  // namespace

struct SessionServer::Impl {
  Impl(SessionHub& h, const std::string& address, unsigned short port, double rate)
      : hub(h),
        acceptor(ioc),
        timer(ioc),
        period(std::chrono::microseconds(static_cast<long long>(1e6 / rate))) {
    beast::error_code ec;
    const auto addr = asio::ip::make_address(address == "localhost" ? "127.0.0.1" : address, ec);
    if (ec) throw Error("bad listen address '" + address + "': " + ec.message());
    const tcp::endpoint ep(addr, port);
    acceptor.open(ep.protocol(), ec);
    if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(ep, ec);
    if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw Error("cannot listen on " + address + ":" + std::to_string(port) + ": " +
                        ec.message());
    bound_port = acceptor.local_endpoint().port();
    hub.set_wakeup([this] { asio::post(ioc, [this] { flush_events(); }); });
    accept();
    tick();
    thread = std::thread([this] { ioc.run(); });
  }

  ~Impl() { stop(); }

  void stop() {
    if (stopped.exchange(true)) return;
    hub.set_wakeup({});
    asio::post(ioc, [this] {
      beast::error_code ec;
      acceptor.close(ec);
      timer.cancel();
      for (auto& s : sessions) s->close();
      sessions.clear();
      hub.set_client_count(0);
      ioc.stop();
    });
    if (thread.joinable()) thread.join();
  }

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto session = std::make_shared<WsSession>(std::move(socket), hub, [this](WsSession* s) {
        for (auto it = sessions.begin(); it != sessions.end(); ++it) {
          if (it->get() == s) {
            sessions.erase(it);
            break;
          }
        }
        hub.set_client_count(sessions.size());
        hub.push_inbound({SessionHub::Inbound::Type::Disconnect, {}});
      });
      session->start([this](std::shared_ptr<WsSession> s) {
        sessions.push_back(std::move(s));
        hub.set_client_count(sessions.size());
      });
      accept();
    });
  }

  void broadcast(MessageKind kind, json payload) {
    if (sessions.empty()) return;
    const std::string text = encode_message({kind, ++seq, std::move(payload)});
    for (auto& s : sessions) s->send(text);
  }

  void flush_events() {
    for (auto& e : hub.take_events()) broadcast(e.kind, std::move(e.payload));
  }

  void tick() {
    timer.expires_after(period);
    timer.async_wait([this](beast::error_code ec) {
      if (ec) return;
      flush_events();
      if (auto state = hub.take_state()) broadcast(MessageKind::StateUpdate, std::move(*state));
      tick();
    });
  }

  SessionHub& hub;
  asio::io_context ioc;
  tcp::acceptor acceptor;
  asio::steady_timer timer;
  std::chrono::microseconds period;
  std::vector<std::shared_ptr<WsSession>> sessions;
  std::uint64_t seq = 0;
  unsigned short bound_port = 0;
  std::atomic<bool> stopped{false};
  std::thread thread;
};

SessionServer::SessionServer(SessionHub& hub, const std::string& address, unsigned short port,
                             double state_rate_hz)
    : impl_(std::make_unique<Impl>(hub, address, port, state_rate_hz)) {}

SessionServer::~SessionServer() = default;

unsigned short SessionServer::port() const { return impl_->bound_port; }

void SessionServer::stop() { impl_->stop(); }

TrainResult serve(const RunConfig& base, const ServeOptions& opts) {
  RunConfig cfg = base;
  cfg.intervention = InterventionMode::Remote;
  cfg.validate();
  SessionHub hub;
  SessionServer server(hub, opts.address, opts.port, cfg.serve.state_rate_hz);
  if (opts.on_listening) opts.on_listening(server.port());
  RemoteHumanSource source(hub, cfg.hi, std::chrono::milliseconds(cfg.serve.step_deadline_ms));

  SessionMetrics metrics;
  std::size_t current_episode = 0;
  TrainHooks hooks;
  hooks.source = &source;
  hooks.on_step = [&](const StepEvent& ev) {
    if (ev.episode != current_episode) {
      current_episode = ev.episode;
      metrics = {};
    }
    metrics.add(ev.record);
    if (hub.has_clients()) hub.publish_state(state_payload(ev, metrics));
  };
  hooks.on_episode = [&](EpisodeLog&& log) {
    hub.publish_event(MessageKind::EpisodeEnd, episode_end_payload(log));
    metrics = {};
    if (opts.on_episode) opts.on_episode(std::move(log));
  };
  hooks.on_checkpoint = opts.on_checkpoint;
  TrainResult result = train(cfg, hooks);
  server.stop();
  return result;
}

}  // namespace hippo
