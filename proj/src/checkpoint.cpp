#include "visern/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "visern/config.hpp"
#include "visern/error.hpp"

namespace visern {

namespace {

constexpr char kMagic[4] = {'V', 'S', 'C', 'K'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_bytes(std::vector<std::uint8_t>& out, const std::string& s) {
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw LengthError("checkpoint: truncated at byte " + std::to_string(pos_));
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_record(std::vector<std::uint8_t>& out, const std::string& name, const Matrix& m) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  put_bytes(out, name);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

template <typename T>
T take_uint(std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("checkpoint: missing key '" + key + "'");
  T v{};
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw FormatError("checkpoint: bad value for '" + key + "'");
  kv.erase(it);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  KeyValues kv = to_key_values(ck.config);
  kv.emplace_back("feature_dim", std::to_string(ck.model.feature_dim));
  kv.emplace_back("vocab_size", std::to_string(ck.model.vocab_size));
  kv.emplace_back("epoch", std::to_string(ck.epoch));
  kv.emplace_back("current_lr", format_double(ck.lr));
  kv.emplace_back("best_val_loss", format_double(ck.best_val_loss));
  kv.emplace_back("adam_step", std::to_string(ck.optimizer.step));
  const std::string block = dump_key_values(kv);

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(block.size()));
  put_bytes(out, block);

  const auto params = ck.params.named();
  for (const auto& [name, m] : params) put_record(out, name, *m);
  if (!ck.optimizer.first_moment.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      put_record(out, "adam.m." + params[i].first, ck.optimizer.first_moment.at(i));
      put_record(out, "adam.v." + params[i].first, ck.optimizer.second_moment.at(i));
    }
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 && std::memcmp(bytes.data(), kMagic, bytes.size()) == 0)
    throw LengthError("checkpoint: truncated inside the magic");
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic (expected \"VSCK\")");
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const std::string block = r.str(r.u32());

  std::map<std::string, std::string> state;
  KeyValues config_kv;
  for (auto& [k, v] : parse_key_values(block)) {
    if (k == "feature_dim" || k == "vocab_size" || k == "epoch" || k == "current_lr" ||
        k == "best_val_loss" || k == "adam_step") {
      state[k] = v;
    } else {
      config_kv.emplace_back(k, v);
    }
  }

  Checkpoint ck;
  apply_config(ck.config, config_kv);
  const auto feature_dim = take_uint<std::size_t>(state, "feature_dim");
  const auto vocab_size = take_uint<std::size_t>(state, "vocab_size");
  ck.model = model_config(ck.config, feature_dim, vocab_size);
  ck.epoch = take_uint<std::size_t>(state, "epoch");
  ck.optimizer.step = take_uint<std::uint64_t>(state, "adam_step");
  for (const char* key : {"current_lr", "best_val_loss"}) {
    auto it = state.find(key);
    if (it == state.end()) throw FormatError(std::string("checkpoint: missing key '") + key + "'");
    double v = 0.0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      throw FormatError(std::string("checkpoint: bad value for '") + key + "'");
    (std::string(key) == "current_lr" ? ck.lr : ck.best_val_loss) = v;
  }
  ck.optimizer.beta1 = ck.config.adam_beta1;
  ck.optimizer.beta2 = ck.config.adam_beta2;
  ck.optimizer.eps = ck.config.adam_eps;

  std::map<std::string, Matrix> records;
  while (!r.done()) {
    const std::string name = r.str(r.u32());
    const std::size_t rows = r.u32();
    const std::size_t cols = r.u32();
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = std::bit_cast<double>(r.u64());
    if (!records.emplace(name, std::move(m)).second)
      throw FormatError("checkpoint: duplicate record '" + name + "'");
  }

  auto params = ck.params.named();
  const bool has_moments = records.count("adam.m." + params.front().first) > 0;
  for (auto& [name, m] : params) {
    auto it = records.find(name);
    if (it == records.end()) throw FormatError("checkpoint: missing record '" + name + "'");
    *m = std::move(it->second);
    records.erase(it);
    if (has_moments) {
      for (auto* dst : {&ck.optimizer.first_moment, &ck.optimizer.second_moment}) {
        const std::string key =
            (dst == &ck.optimizer.first_moment ? "adam.m." : "adam.v.") + name;
        auto mit = records.find(key);
        if (mit == records.end()) throw FormatError("checkpoint: missing record '" + key + "'");
        if (!mit->second.same_shape(*m))
          throw FormatError("checkpoint: record '" + key + "' shape differs from " + name);
        dst->push_back(std::move(mit->second));
        records.erase(mit);
      }
    }
  }
  if (!records.empty())
    throw FormatError("checkpoint: unexpected record '" + records.begin()->first + "'");

  const auto& mc = ck.model;
  auto expect = [](const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols)
      throw FormatError(std::string("checkpoint: ") + what + " is " + m.shape_string());
  };
  expect(ck.params.embed.w_phi, mc.feature_dim, mc.feature_dim, "embed.w_phi");
  expect(ck.params.embed.b_phi, 1, mc.feature_dim, "embed.b_phi");
  expect(ck.params.embed.w_theta, mc.feature_dim, mc.feature_dim, "embed.w_theta");
  expect(ck.params.embed.b_theta, 1, mc.feature_dim, "embed.b_theta");
  expect(ck.params.gcn.w_g, mc.feature_dim, mc.feature_dim, "gcn.w_g");
  expect(ck.params.gcn.w_r, mc.feature_dim, mc.feature_dim, "gcn.w_r");
  expect(ck.params.video.w, mc.feature_dim, mc.common_dim, "video.w");
  expect(ck.params.video.b, 1, mc.common_dim, "video.b");
  expect(ck.params.text.embedding, mc.vocab_size, mc.word_dim, "text.embedding");
  expect(ck.params.text.w, mc.word_dim, mc.common_dim, "text.w");
  expect(ck.params.text.b, 1, mc.common_dim, "text.b");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto bytes = encode_checkpoint(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace visern
