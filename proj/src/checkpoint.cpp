#include "hippo/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hippo {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little endian");

constexpr char kMagic[8] = {'H', 'I', 'P', 'P', 'O', 'C', 'K', 'P'};

class Writer {
 public:
  template <class T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    out_.append(p, sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_ += s;
  }
  void doubles(const double* p, std::size_t n) {
    out_.append(reinterpret_cast<const char*>(p), n * sizeof(double));
  }
  void matrix(const Eigen::MatrixXd& m) {
    pod<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    pod<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    doubles(m.data(), static_cast<std::size_t>(m.size()));
  }
  void mlp(const Mlp& net) {
    pod<std::uint64_t>(net.weights.size());
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
      matrix(net.weights[i]);
      matrix(net.biases[i]);
    }
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Eigen::MatrixXd matrix() {
    const auto rows = pod<std::uint64_t>();
    const auto cols = pod<std::uint64_t>();
    if (rows > (1u << 20) || cols > (1u << 20)) throw Error("checkpoint: implausible matrix size");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const std::size_t n = rows * cols * sizeof(double);
    need(n);
    std::memcpy(m.data(), bytes_.data() + pos_, n);
    pos_ += n;
    return m;
  }
  Mlp mlp() {
    Mlp net;
    const auto layers = pod<std::uint64_t>();
    if (layers == 0 || layers > 64) throw Error("checkpoint: implausible layer count");
    for (std::uint64_t i = 0; i < layers; ++i) {
      net.weights.push_back(matrix());
      const Eigen::MatrixXd b = matrix();
      if (b.cols() != 1 || b.rows() != net.weights.back().rows()) {
        throw Error("checkpoint: bias shape mismatch");
      }
      net.biases.push_back(b.col(0));
    }
    for (std::size_t i = 1; i < net.weights.size(); ++i) {
      if (net.weights[i].cols() != net.weights[i - 1].rows()) {
        throw Error("checkpoint: layer shape mismatch");
      }
    }
    return net;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error("checkpoint: truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  Writer w;
  for (char ch : kMagic) w.pod(ch);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(c.config_hash);
  w.str(c.config);
  w.pod<std::uint64_t>(c.env_steps);
  w.pod<std::uint64_t>(c.updates);
  w.mlp(c.params.actor);
  w.mlp(c.params.critic);
  w.pod<std::uint8_t>(c.params.normalize ? 1 : 0);
  w.pod<double>(c.params.normalize_clip);
  const Normalizer& n = c.params.normalizer;
  w.pod<std::uint64_t>(n.count());
  w.matrix(n.mean());
  w.matrix(n.m2());
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  for (char ch : kMagic) {
    if (r.pod<char>() != ch) throw Error("checkpoint: bad magic (not a checkpoint file)");
  }
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  c.config_hash = r.str();
  c.config = r.str();
  c.env_steps = r.pod<std::uint64_t>();
  c.updates = r.pod<std::uint64_t>();
  c.params.actor = r.mlp();
  c.params.critic = r.mlp();
  c.params.normalize = r.pod<std::uint8_t>() != 0;
  c.params.normalize_clip = r.pod<double>();
  const auto count = r.pod<std::uint64_t>();
  const Eigen::MatrixXd mean = r.matrix();
  const Eigen::MatrixXd m2 = r.matrix();
  if (mean.cols() != 1 || m2.cols() != 1 || mean.rows() != m2.rows() ||
      mean.rows() != c.params.actor.input_size() || c.params.critic.input_size() != mean.rows()) {
    throw Error("checkpoint: normaliser shape mismatch");
  }
  c.params.normalizer = Normalizer(static_cast<int>(mean.rows()));
  c.params.normalizer.restore(count, mean.col(0), m2.col(0));
  if (!r.done()) throw Error("checkpoint: trailing bytes");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace hippo
