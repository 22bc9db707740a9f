#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "visern/matrix.hpp"
#include "visern/regions_io.hpp"
#include "visern/trainer.hpp"

namespace visern {

enum class Direction { kTextToVideo, kVideoToText };
const char* to_string(Direction d);

struct RetrievalReport {
  Direction direction = Direction::kTextToVideo;
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  double med_r = 0.0;
  double mean_r = 0.0;
  double sum_of_recalls = 0.0;
};

bool operator==(const RetrievalReport& a, const RetrievalReport& b);

/// 1-based rank of the best-placed positive for each query row of `s`
/// (Q x G). The gallery is ordered by descending similarity, ties going to
/// the lower index. ConfigError if a query has no positives or a positive is
/// out of range.
std::vector<std::size_t> rank_queries(const Matrix& s,
                                      std::span<const std::vector<std::size_t>> ground_truth);

/// Recall at 1/5/10 (percent), median and mean rank. Even counts take the
/// mean of the two middle ranks.
RetrievalReport report(std::span<const std::size_t> ranks,
                       Direction direction = Direction::kTextToVideo);

struct AttentionMap {
  std::vector<double> scores;      // normalised (n - r_i)^2
  std::vector<std::size_t> ranks;  // r_i, 0 = most similar to the frame
  std::vector<double> similarity;  // cosine(z_i, mean of z)
};

/// DegenerateInputError when the pooled frame feature has zero norm.
AttentionMap attention_map(const Matrix& z);

struct AttentionRow {
  std::string video_id;
  std::size_t frame_index = 0;
  std::size_t region_index = 0;
  std::size_t rank = 0;
  double score = 0.0;
};

struct Evaluation {
  RetrievalReport text_to_video;
  RetrievalReport video_to_text;
  std::vector<AttentionRow> attention;  // filled only on request
};

/// Ground truth for both directions from caption -> video links.
std::vector<std::vector<std::size_t>> text_to_video_truth(const Dataset& ds);
std::vector<std::vector<std::size_t>> video_to_text_truth(const Dataset& ds);

/// Encodes every video and caption of `ds` with the checkpoint's model and
/// ranks in both directions.
Evaluation evaluate(const Checkpoint& ck, const Dataset& ds, bool with_attention = false);

/// Attention rows for every region of every frame in `ds`.
std::vector<AttentionRow> attention_rows(const Checkpoint& ck, const Dataset& ds);

/// `direction,r1,r5,r10,medr,meanr,sumr`, one row per report.
std::string reports_csv(std::span<const RetrievalReport> reports);
void write_reports_csv(const std::filesystem::path& path,
                       std::span<const RetrievalReport> reports);
/// `video_id,frame_index,region_index,rank,score`.
void write_attention_csv(const std::filesystem::path& path, std::span<const AttentionRow> rows);

}  // namespace visern
