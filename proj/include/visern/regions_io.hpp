#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "visern/matrix.hpp"

namespace visern {

/// Region features of one frame: n regions, each a d-dimensional row.
struct RegionSet {
  Matrix features;
  std::size_t frame_index = 0;
};

struct VideoSample {
  std::string video_id;
  std::vector<RegionSet> frames;

  std::size_t num_regions() const { return frames.empty() ? 0 : frames.front().features.rows(); }
  std::size_t feature_dim() const { return frames.empty() ? 0 : frames.front().features.cols(); }
};

struct Caption {
  std::vector<std::size_t> token_ids;
  std::size_t video_index = 0;
};

enum class Split { kTrain, kVal, kTest };

const char* to_string(Split split);
Split parse_split(const std::string& name);

struct Dataset {
  std::vector<VideoSample> videos;
  std::vector<Caption> captions;
  std::size_t vocab_size = 0;
  Split split = Split::kTrain;
};

/// Throws DataError / VocabularyError / ShapeError on the first violated
/// invariant: shared (n, d) across frames, captions resolving to a video,
/// at least one caption per video, token ids inside the vocabulary.
void validate(const Dataset& ds);

// ---- VSRN feature file --------------------------------------------------
//
// Little-endian: "VSRN", u32 version (1), u32 num_videos,
// u32 frames_per_video, u32 n, u32 d, then f32 payload, video-major,
// frame-major, row-major.

inline constexpr std::uint32_t kFeatureFormatVersion = 1;

std::vector<std::uint8_t> encode_features(std::span<const VideoSample> videos);
std::vector<VideoSample> decode_features(std::span<const std::uint8_t> bytes);

void write_features(const std::filesystem::path& path, std::span<const VideoSample> videos);
std::vector<VideoSample> load_features(const std::filesystem::path& path);

// ---- captions / vocabulary ----------------------------------------------

/// One line per caption: `video_index<TAB>id id id`.
void write_captions(const std::filesystem::path& path, std::span<const Caption> captions);
std::vector<Caption> load_captions(const std::filesystem::path& path);

/// One token per line; the line number is the token id.
void write_vocab(const std::filesystem::path& path, std::span<const std::string> tokens);
std::vector<std::string> load_vocab(const std::filesystem::path& path);

/// Dataset directory layout: `<split>.vsrn`, `<split>.captions`, `vocab.txt`.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds,
                   std::span<const std::string> vocab);
Dataset load_dataset(const std::filesystem::path& dir, Split split);

// ---- frame sampling -------------------------------------------------------

/// index_i = floor(i * available / target) for i in [0, target).
std::vector<std::size_t> sample_frames(std::size_t available, std::size_t target);

/// Returns a copy of `video` with exactly `target` frames chosen by
/// sample_frames.
VideoSample resample_video(const VideoSample& video, std::size_t target);

// ---- synthetic data -------------------------------------------------------

struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t num_pairs = 200;
  std::size_t regions = 36;
  std::size_t feature_dim = 2048;
  std::size_t vocab_size = 1000;
  double noise_scale = 0.1;
  std::size_t frames = 16;
  std::size_t topics = 100;
  std::size_t caption_length = 8;
  Split split = Split::kTrain;
};

/// Planted-topic dataset. Pair i belongs to topic i mod topics. Region j of
/// every frame is the topic's j-th object prototype plus Gaussian noise; the
/// caption draws its tokens from the topic's contiguous vocabulary band.
/// Prototypes depend only on the seed, so splits generated with the same
/// seed share topics.
Dataset synth_dataset(const SynthConfig& cfg);

std::vector<std::string> synth_vocab(std::size_t vocab_size, std::size_t topics);

}  // namespace visern
