#include "visern/regions_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "visern/error.hpp"
#include "visern/rng.hpp"

namespace visern {

namespace {

constexpr std::uint8_t kFeatureMagic[4] = {'V', 'S', 'R', 'N'};
constexpr std::size_t kFeatureHeaderBytes = 4 + 5 * 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > UINT32_MAX) throw ShapeError(std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = {}) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = {}) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

void validate(const Dataset& ds) {
  if (ds.videos.empty()) throw EmptyInputError("dataset has no videos");
  const std::size_t n = ds.videos.front().num_regions();
  const std::size_t d = ds.videos.front().feature_dim();
  if (n == 0 || d == 0) throw ShapeError("dataset regions must have n >= 1 and d >= 1");
  for (const auto& v : ds.videos) {
    if (v.frames.empty()) throw EmptyInputError("video " + v.video_id + " has no frames");
    for (const auto& f : v.frames) {
      if (f.features.rows() != n || f.features.cols() != d) {
        throw ShapeError("video " + v.video_id + " frame " + std::to_string(f.frame_index) +
                         " is " + f.features.shape_string() + ", expected " +
                         std::to_string(n) + "x" + std::to_string(d));
      }
      require_finite(f.features, "video " + v.video_id);
    }
  }
  std::vector<std::size_t> per_video(ds.videos.size(), 0);
  for (std::size_t c = 0; c < ds.captions.size(); ++c) {
    const auto& cap = ds.captions[c];
    if (cap.video_index >= ds.videos.size()) {
      throw DataError("caption " + std::to_string(c) + " refers to video " +
                      std::to_string(cap.video_index) + " of " +
                      std::to_string(ds.videos.size()));
    }
    if (cap.token_ids.empty()) throw DataError("caption " + std::to_string(c) + " is empty");
    for (auto t : cap.token_ids) {
      if (t >= ds.vocab_size) {
        throw VocabularyError("token id " + std::to_string(t) + " outside vocabulary of " +
                              std::to_string(ds.vocab_size));
      }
    }
    ++per_video[cap.video_index];
  }
  for (std::size_t v = 0; v < per_video.size(); ++v) {
    if (per_video[v] == 0) throw DataError("video " + ds.videos[v].video_id + " has no caption");
  }
}

std::vector<std::uint8_t> encode_features(std::span<const VideoSample> videos) {
  const std::size_t frames = videos.empty() ? 0 : videos.front().frames.size();
  const std::size_t n = videos.empty() ? 0 : videos.front().num_regions();
  const std::size_t d = videos.empty() ? 0 : videos.front().feature_dim();

  std::vector<std::uint8_t> out(std::begin(kFeatureMagic), std::end(kFeatureMagic));
  out.reserve(kFeatureHeaderBytes + videos.size() * frames * n * d * 4);
  put_u32(out, kFeatureFormatVersion);
  put_u32(out, checked_u32(videos.size(), "num_videos"));
  put_u32(out, checked_u32(frames, "frames_per_video"));
  put_u32(out, checked_u32(n, "n"));
  put_u32(out, checked_u32(d, "d"));
  for (const auto& v : videos) {
    if (v.frames.size() != frames) {
      throw ShapeError("video " + v.video_id + " has " + std::to_string(v.frames.size()) +
                       " frames, expected " + std::to_string(frames));
    }
    for (const auto& f : v.frames) {
      if (f.features.rows() != n || f.features.cols() != d) {
        throw ShapeError("video " + v.video_id + " frame is " + f.features.shape_string());
      }
      for (double x : f.features.data()) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(x));
        put_u32(out, bits);
      }
    }
  }
  return out;
}

std::vector<VideoSample> decode_features(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kFeatureMagic, 4) != 0)
    throw FormatError("feature file: bad magic (expected \"VSRN\")");
  if (bytes.size() < kFeatureHeaderBytes)
    throw LengthError("feature file: truncated header (" + std::to_string(bytes.size()) +
                      " bytes)");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kFeatureFormatVersion)
    throw FormatError("feature file: unsupported version " + std::to_string(version));
  const std::size_t num_videos = get_u32(bytes, 8);
  const std::size_t frames = get_u32(bytes, 12);
  const std::size_t n = get_u32(bytes, 16);
  const std::size_t d = get_u32(bytes, 20);
  if (num_videos > 0 && (frames == 0 || n == 0 || d == 0))
    throw FormatError("feature file: zero frame, region or feature dimension");

  const std::size_t values = num_videos * frames * n * d;
  const std::size_t expected = kFeatureHeaderBytes + values * 4;
  if (bytes.size() != expected) {
    throw LengthError("feature file: payload is " + std::to_string(bytes.size()) +
                      " bytes, header implies " + std::to_string(expected));
  }

  std::vector<VideoSample> videos(num_videos);
  std::size_t offset = kFeatureHeaderBytes;
  for (std::size_t v = 0; v < num_videos; ++v) {
    videos[v].video_id = std::to_string(v);
    videos[v].frames.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
      Matrix m(n, d);
      for (auto& x : m.data()) {
        const float value = std::bit_cast<float>(get_u32(bytes, offset));
        if (!std::isfinite(value)) {
          throw DataError("feature file: non-finite value at byte offset " +
                          std::to_string(offset));
        }
        x = value;
        offset += 4;
      }
      videos[v].frames[f] = RegionSet{std::move(m), f};
    }
  }
  return videos;
}

void write_features(const std::filesystem::path& path, std::span<const VideoSample> videos) {
  const auto bytes = encode_features(videos);
  auto out = open_out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<VideoSample> load_features(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_features(bytes);
}

void write_captions(const std::filesystem::path& path, std::span<const Caption> captions) {
  auto out = open_out(path);
  for (const auto& c : captions) {
    out << c.video_index << '\t';
    for (std::size_t i = 0; i < c.token_ids.size(); ++i) {
      if (i) out << ' ';
      out << c.token_ids[i];
    }
    out << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<Caption> load_captions(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Caption> captions;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": missing tab");
    Caption c;
    try {
      std::size_t used = 0;
      c.video_index = std::stoull(line.substr(0, tab), &used);
      if (used != tab) throw std::invalid_argument("index");
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad video index");
    }
    std::istringstream tokens(line.substr(tab + 1));
    std::string tok;
    while (tokens >> tok) {
      if (tok.find_first_not_of("0123456789") != std::string::npos)
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad token id '" +
                          tok + "'");
      c.token_ids.push_back(std::stoull(tok));
    }
    if (c.token_ids.empty())
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty caption");
    captions.push_back(std::move(c));
  }
  return captions;
}

void write_vocab(const std::filesystem::path& path, std::span<const std::string> tokens) {
  auto out = open_out(path);
  for (const auto& t : tokens) out << t << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<std::string> load_vocab(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return tokens;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds,
                   std::span<const std::string> vocab) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const std::string stem = to_string(ds.split);
  write_features(dir / (stem + ".vsrn"), ds.videos);
  write_captions(dir / (stem + ".captions"), ds.captions);
  write_vocab(dir / "vocab.txt", vocab);
}

Dataset load_dataset(const std::filesystem::path& dir, Split split) {
  const std::string stem = to_string(split);
  Dataset ds;
  ds.split = split;
  ds.videos = load_features(dir / (stem + ".vsrn"));
  ds.captions = load_captions(dir / (stem + ".captions"));
  ds.vocab_size = load_vocab(dir / "vocab.txt").size();
  validate(ds);
  return ds;
}

std::vector<std::size_t> sample_frames(std::size_t available, std::size_t target) {
  std::vector<std::size_t> idx(target);
  for (std::size_t i = 0; i < target; ++i) idx[i] = i * available / target;
  return idx;
}

VideoSample resample_video(const VideoSample& video, std::size_t target) {
  if (video.frames.empty()) throw EmptyInputError("video " + video.video_id + " has no frames");
  if (target == 0) throw ConfigError("frame target must be >= 1");
  VideoSample out;
  out.video_id = video.video_id;
  for (auto i : sample_frames(video.frames.size(), target)) out.frames.push_back(video.frames[i]);
  return out;
}

std::vector<std::string> synth_vocab(std::size_t vocab_size, std::size_t topics) {
  std::vector<std::string> vocab(vocab_size);
  const std::size_t band = topics == 0 ? vocab_size : vocab_size / topics;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    const std::size_t topic = band == 0 ? 0 : i / band;
    vocab[i] = topic < topics ? "t" + std::to_string(topic) + "_w" + std::to_string(i % band)
                              : "pad" + std::to_string(i);
  }
  return vocab;
}

Dataset synth_dataset(const SynthConfig& cfg) {
  if (cfg.num_pairs < 2) throw ConfigError("synth: need at least 2 pairs");
  if (!(cfg.noise_scale >= 0.0)) throw ConfigError("synth: noise scale must be >= 0");
  if (cfg.topics == 0) throw ConfigError("synth: need at least one topic");
  if (cfg.vocab_size < cfg.topics)
    throw ConfigError("synth: vocabulary of " + std::to_string(cfg.vocab_size) +
                      " is smaller than " + std::to_string(cfg.topics) + " topics");
  if (cfg.regions == 0 || cfg.feature_dim == 0 || cfg.frames == 0 || cfg.caption_length == 0)
    throw ConfigError("synth: regions, feature dim, frames and caption length must be >= 1");

  Rng topic_rng(cfg.seed, "synth/topics");
  std::vector<Matrix> prototypes;
  prototypes.reserve(cfg.topics);
  for (std::size_t t = 0; t < cfg.topics; ++t)
    prototypes.push_back(topic_rng.normal_matrix(cfg.regions, cfg.feature_dim));

  Rng rng(cfg.seed, std::string("synth/") + to_string(cfg.split));
  const std::size_t band = cfg.vocab_size / cfg.topics;

  Dataset ds;
  ds.split = cfg.split;
  ds.vocab_size = cfg.vocab_size;
  ds.videos.reserve(cfg.num_pairs);
  ds.captions.reserve(cfg.num_pairs);
  for (std::size_t i = 0; i < cfg.num_pairs; ++i) {
    const std::size_t topic = i % cfg.topics;
    VideoSample video;
    video.video_id = std::to_string(i);
    for (std::size_t f = 0; f < cfg.frames; ++f) {
      Matrix regions = prototypes[topic];
      if (cfg.noise_scale > 0.0) {
        for (auto& x : regions.data()) x += cfg.noise_scale * rng.normal();
      }
      video.frames.push_back(RegionSet{std::move(regions), f});
    }
    ds.videos.push_back(std::move(video));

    Caption caption;
    caption.video_index = i;
    for (std::size_t k = 0; k < cfg.caption_length; ++k)
      caption.token_ids.push_back(topic * band + rng.below(band));
    ds.captions.push_back(std::move(caption));
  }
  return ds;
}

}  // namespace visern
