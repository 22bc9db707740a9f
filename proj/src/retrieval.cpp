#include "visern/retrieval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "visern/error.hpp"
#include "visern/model.hpp"
#include "visern/parallel.hpp"

namespace visern {

const char* to_string(Direction d) {
  return d == Direction::kTextToVideo ? "text-to-video" : "video-to-text";
}

bool operator==(const RetrievalReport& a, const RetrievalReport& b) {
  return a.direction == b.direction && a.r1 == b.r1 && a.r5 == b.r5 && a.r10 == b.r10 &&
         a.med_r == b.med_r && a.mean_r == b.mean_r && a.sum_of_recalls == b.sum_of_recalls;
}

std::vector<std::size_t> rank_queries(const Matrix& s,
                                      std::span<const std::vector<std::size_t>> ground_truth) {
  if (ground_truth.size() != s.rows())
    throw ConfigError("rank_queries: " + std::to_string(ground_truth.size()) +
                      " ground-truth sets for " + std::to_string(s.rows()) + " queries");
  const std::size_t g = s.cols();
  std::vector<std::size_t> ranks(s.rows());
  parallel_for(s.rows(), [&](std::size_t q) {
    const auto& positives = ground_truth[q];
    if (positives.empty())
      throw ConfigError("rank_queries: query " + std::to_string(q) + " has no ground truth");
    // Rank of item j = 1 + number of gallery items placed before it.
    std::size_t best = g + 1;
    for (auto j : positives) {
      if (j >= g)
        throw ConfigError("rank_queries: ground truth " + std::to_string(j) +
                          " outside gallery of " + std::to_string(g));
      const double sj = s(q, j);
      std::size_t ahead = 0;
      for (std::size_t k = 0; k < g; ++k) {
        const double sk = s(q, k);
        if (sk > sj || (sk == sj && k < j)) ++ahead;
      }
      best = std::min(best, ahead + 1);
    }
    ranks[q] = best;
  });
  return ranks;
}

RetrievalReport report(std::span<const std::size_t> ranks, Direction direction) {
  RetrievalReport r;
  r.direction = direction;
  if (ranks.empty()) return r;
  const double q = static_cast<double>(ranks.size());
  auto recall = [&](std::size_t k) {
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](auto x) { return x <= k; });
    return 100.0 * static_cast<double>(hits) / q;
  };
  r.r1 = recall(1);
  r.r5 = recall(5);
  r.r10 = recall(10);
  std::vector<std::size_t> sorted(ranks.begin(), ranks.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  r.med_r = m % 2 == 1 ? static_cast<double>(sorted[m / 2])
                       : 0.5 * static_cast<double>(sorted[m / 2 - 1] + sorted[m / 2]);
  r.mean_r = static_cast<double>(std::accumulate(sorted.begin(), sorted.end(), std::size_t{0})) / q;
  r.sum_of_recalls = r.r1 + r.r5 + r.r10;
  return r;
}

AttentionMap attention_map(const Matrix& z) {
  const std::size_t n = z.rows();
  if (n == 0) throw EmptyInputError("attention_map: no regions");
  const Matrix pooled = mean_rows(z);
  if (norm2(pooled.data()) == 0.0)
    throw DegenerateInputError("attention_map: pooled frame feature has zero norm");

  AttentionMap a;
  a.similarity.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.similarity[i] = cosine(z.row(i), pooled.data());

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto x, auto y) { return a.similarity[x] > a.similarity[y]; });
  a.ranks.resize(n);
  for (std::size_t r = 0; r < n; ++r) a.ranks[order[r]] = r;

  // sum over r of (n - r)^2 = n(n+1)(2n+1)/6, exact in double for any sane n.
  const double nd = static_cast<double>(n);
  const double total = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 6.0;
  a.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = nd - static_cast<double>(a.ranks[i]);
    a.scores[i] = s * s / total;
  }
  return a;
}

std::vector<std::vector<std::size_t>> text_to_video_truth(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> gt;
  gt.reserve(ds.captions.size());
  for (const auto& c : ds.captions) gt.push_back({c.video_index});
  return gt;
}

std::vector<std::vector<std::size_t>> video_to_text_truth(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> gt(ds.videos.size());
  for (std::size_t c = 0; c < ds.captions.size(); ++c) {
    const auto v = ds.captions[c].video_index;
    if (v >= gt.size()) throw DataError("caption " + std::to_string(c) + " names missing video");
    gt[v].push_back(c);
  }
  return gt;
}

std::vector<AttentionRow> attention_rows(const Checkpoint& ck, const Dataset& ds_in) {
  const Dataset ds = with_frames(ds_in, ck.config.frames);
  std::vector<std::vector<AttentionRow>> per_video(ds.videos.size());
  parallel_for(ds.videos.size(), [&](std::size_t v) {
    const auto& video = ds.videos[v];
    for (const auto& frame : video.frames) {
      const auto reasoned =
          rw_gcn_forward(frame.features, ck.params.embed, ck.params.gcn, ck.model.reasoning);
      const AttentionMap a = attention_map(reasoned.z);
      for (std::size_t i = 0; i < a.scores.size(); ++i)
        per_video[v].push_back({video.video_id, frame.frame_index, i, a.ranks[i], a.scores[i]});
    }
  });
  std::vector<AttentionRow> rows;
  for (auto& pv : per_video) rows.insert(rows.end(), pv.begin(), pv.end());
  return rows;
}

Evaluation evaluate(const Checkpoint& ck, const Dataset& ds_in, bool with_attention) {
  validate(ds_in);
  if (ds_in.vocab_size > ck.model.vocab_size)
    throw VocabularyError("dataset vocabulary " + std::to_string(ds_in.vocab_size) +
                          " exceeds checkpoint vocabulary " +
                          std::to_string(ck.model.vocab_size));
  if (ds_in.videos.front().feature_dim() != ck.model.feature_dim)
    throw ShapeError("dataset feature dim " + std::to_string(ds_in.videos.front().feature_dim()) +
                     " does not match checkpoint " + std::to_string(ck.model.feature_dim));
  const Dataset ds = with_frames(ds_in, ck.config.frames);

  const Matrix videos = embed_videos(ds.videos, ck.params, ck.model);
  const Matrix texts = embed_captions(ds.captions, ck.params);
  const Matrix s_vt = similarity_matrix(videos, texts);  // videos x captions
  const Matrix s_tv = s_vt.transposed();

  Evaluation e;
  e.text_to_video =
      report(rank_queries(s_tv, text_to_video_truth(ds)), Direction::kTextToVideo);
  e.video_to_text =
      report(rank_queries(s_vt, video_to_text_truth(ds)), Direction::kVideoToText);
  if (with_attention) e.attention = attention_rows(ck, ds_in);
  return e;
}

std::string reports_csv(std::span<const RetrievalReport> reports) {
  std::string out = "direction,r1,r5,r10,medr,meanr,sumr\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f\n", to_string(r.direction),
                  r.r1, r.r5, r.r10, r.med_r, r.mean_r, r.sum_of_recalls);
    out += buf;
  }
  return out;
}

void write_reports_csv(const std::filesystem::path& path,
                       std::span<const RetrievalReport> reports) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << reports_csv(reports);
  if (!out) throw IoError("short write to " + path.string());
}

void write_attention_csv(const std::filesystem::path& path, std::span<const AttentionRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "video_id,frame_index,region_index,rank,score\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.score);
    out << r.video_id << ',' << r.frame_index << ',' << r.region_index << ',' << r.rank << ','
        << buf << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace visern
