#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hippo/runner.hpp"

namespace hippo {

enum class MessageKind {
  StateUpdate,
  InterventionBegin,
  InterventionEnd,
  HumanAction,
  EpisodeEnd,
  Heartbeat,
};

std::string_view to_string(MessageKind k);
std::optional<MessageKind> parse_message_kind(std::string_view s);

// One JSON object per WebSocket text frame: {"kind", "seq", "payload"}.
struct SessionMessage {
  MessageKind kind = MessageKind::Heartbeat;
  std::uint64_t seq = 0;
  nlohmann::json payload = nlohmann::json::object();
};

std::string encode_message(const SessionMessage& m);

// nullopt for unknown kinds. Throws Error for malformed frames, a missing
// sequence number, or a human_action outside 0..5.
std::optional<SessionMessage> decode_message(const std::string& text);

SessionMessage human_action_message(Action a, std::uint64_t seq);

// Running figures shown alongside each state update.
struct SessionMetrics {
  std::size_t steps = 0;
  std::size_t collisions = 0;
  std::size_t proximity = 0;
  double path_error_sum = 0.0;

  void add(const StepRecord& r);
  double ate() const { return steps ? path_error_sum / static_cast<double>(steps) : 0.0; }
  double security() const;
};

nlohmann::json state_payload(const StepEvent& ev, const SessionMetrics& metrics);
nlohmann::json episode_end_payload(const EpisodeLog& log);

// The only channel between the stepping context and the network thread.
// Outbound state snapshots coalesce to the latest one; events and inbound
// messages are queued in order.
class SessionHub {
 public:
  struct Inbound {
    enum class Type { Message, Disconnect } type = Type::Message;
    SessionMessage message;
  };

  // Stepping side.
  void publish_state(nlohmann::json payload);
  void publish_event(MessageKind kind, nlohmann::json payload);
  std::vector<Inbound> drain_inbound();
  // Waits until inbound data is pending or the timeout passes.
  bool wait_inbound(std::chrono::milliseconds timeout);
  bool has_clients() const;

  // Network side.
  void push_inbound(Inbound in);
  std::optional<nlohmann::json> take_state();
  std::vector<SessionMessage> take_events();  // kind and payload; seq unset
  void set_client_count(std::size_t n);
  void set_wakeup(std::function<void()> wake);

 private:
  mutable std::mutex mutex_;
  std::condition_variable inbound_cv_;
  std::deque<Inbound> inbound_;
  std::optional<nlohmann::json> latest_state_;
  std::vector<SessionMessage> events_;
  std::size_t clients_ = 0;
  std::function<void()> wake_;
};

// Human takeovers received over the session. Samples the inbound queue once
// per step; the newest action wins and older ones are discarded. While
// active without fresh input, waits up to the step deadline, then repeats the
// last action for human_hold_steps steps before ending the takeover.
class RemoteHumanSource : public InterventionSource {
 public:
  RemoteHumanSource(SessionHub& hub, HIConfig hi, std::chrono::milliseconds step_deadline)
      : hub_(hub), hi_(hi), deadline_(step_deadline) {}

  InterventionSourceKind kind() const override { return InterventionSourceKind::RemoteHuman; }
  void reset_episode(std::size_t episode) override;
  InterventionState begin_step(const StepContext& ctx) override;
  void end_step(const StepContext&, const Arbitration&) override {}

  // Executed takeover actions keyed by (episode, step), for offline replay.
  const std::map<RecordedSource::Key, Action>& recorded() const { return recorded_; }
  bool active() const { return active_; }

 private:
  void process(const std::vector<SessionHub::Inbound>& events, std::optional<Action>& fresh);
  void end(const char* reason);

  SessionHub& hub_;
  HIConfig hi_;
  std::chrono::milliseconds deadline_;
  bool active_ = false;
  std::optional<Action> held_;
  int repeats_ = 0;
  std::size_t episode_ = 0;
  std::map<RecordedSource::Key, Action> recorded_;
};

// WebSocket endpoint on its own I/O thread. State updates go out at most at
// `state_rate_hz`; events are sent as soon as they are published.
class SessionServer {
 public:
  SessionServer(SessionHub& hub, const std::string& address, unsigned short port,
                double state_rate_hz);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  unsigned short port() const;  // the bound port (useful with port 0)
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// "host:port"; throws Error when malformed.
std::pair<std::string, unsigned short> parse_listen_address(const std::string& s);

struct ServeOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;
  std::function<void(unsigned short)> on_listening;
  std::function<void(EpisodeLog&&)> on_episode;
  std::function<void(const Checkpoint&)> on_checkpoint;
};

// Trains with RemoteHumanSource as the intervention source while serving the
// session protocol. With no console connected this is headless training with
// interventions disabled.
TrainResult serve(const RunConfig& cfg, const ServeOptions& opts);

}  // namespace hippo
