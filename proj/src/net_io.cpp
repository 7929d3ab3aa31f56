#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "tddm/io.hpp"
#include "tddm/net.hpp"

namespace tddm::net {

namespace {

constexpr char kMagic[8] = {'T', 'D', 'D', 'M', 'N', 'E', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kEndianTag = 0x01020304u;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T byteswap_any(T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof v);
  std::reverse(bytes, bytes + sizeof(T));
  std::memcpy(&v, bytes, sizeof v);
  return v;
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  void set_swap(bool swap) { swap_ = swap; }

  template <typename T>
  T get(const char* what) {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) throw IoError(std::string("checkpoint truncated while reading ") + what);
    return swap_ ? byteswap_any(v) : v;
  }

 private:
  std::istream& in_;
  bool swap_ = false;
};

}  // namespace

void write_checkpoint(std::ostream& out, const NetworkParams& params) {
  const NetworkSpec& s = params.spec();
  out.write(kMagic, sizeof kMagic);
  put(out, kVersion);
  put(out, kEndianTag);
  put<std::int32_t>(out, s.input_height);
  put<std::int32_t>(out, s.input_width);
  for (const auto& c : s.conv) {
    put<std::int32_t>(out, c.out_channels);
    put<std::int32_t>(out, c.kernel);
    put<std::int32_t>(out, c.stride);
  }
  put<std::int32_t>(out, s.lstm_units);
  put<std::int32_t>(out, s.n_actions);
  put<std::int32_t>(out, s.unroll_length);
  put<std::uint64_t>(out, params.size());
  const auto values = params.values();
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw IoError("failed to write checkpoint");
}

NetworkParams read_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw IoError("not a network checkpoint (bad magic)");
  }
  Reader r(in);
  std::uint32_t version = r.get<std::uint32_t>("version");
  const std::uint32_t tag = r.get<std::uint32_t>("endianness tag");
  if (tag == byteswap_any(kEndianTag)) {
    r.set_swap(true);
    version = byteswap_any(version);
  } else if (tag != kEndianTag) {
    throw IoError("checkpoint has an unrecognised endianness tag");
  }
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  NetworkSpec s;
  s.input_height = r.get<std::int32_t>("spec");
  s.input_width = r.get<std::int32_t>("spec");
  for (auto& c : s.conv) {
    c.out_channels = r.get<std::int32_t>("spec");
    c.kernel = r.get<std::int32_t>("spec");
    c.stride = r.get<std::int32_t>("spec");
  }
  s.lstm_units = r.get<std::int32_t>("spec");
  s.n_actions = r.get<std::int32_t>("spec");
  s.unroll_length = r.get<std::int32_t>("spec");
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("checkpoint header: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>("parameter count");
  if (count != s.parameter_count()) {
    throw IoError("checkpoint parameter count " + std::to_string(count) +
                  " does not match its network spec (" + std::to_string(s.parameter_count()) + ")");
  }
  NetworkParams params(s);
  for (double& v : params.values()) v = r.get<double>("parameters");
  return params;
}

void save_checkpoint(const std::string& path, const NetworkParams& params) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, params);
  io::write_file_atomic(path, out.str());
}

NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace tddm::net
