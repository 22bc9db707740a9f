#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "support.hpp"
#include "visern/error.hpp"
#include "visern/retrieval.hpp"

using namespace visern;

namespace {

// Sort the gallery by (score desc, index asc) and take the first positive.
std::size_t rank_oracle(const Matrix& s, std::size_t q, const std::vector<std::size_t>& pos) {
  std::vector<std::size_t> order(s.cols());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s(q, a) > s(q, b); });
  for (std::size_t r = 0; r < order.size(); ++r)
    if (std::find(pos.begin(), pos.end(), order[r]) != pos.end()) return r + 1;
  return 0;
}

Dataset data(Split split, std::size_t pairs, std::size_t topics = 10) {
  SynthConfig sc;
  sc.num_pairs = pairs;
  sc.regions = 4;
  sc.feature_dim = 8;
  sc.vocab_size = 6 * topics;
  sc.topics = topics;
  sc.frames = 2;
  sc.caption_length = 6;
  sc.split = split;
  return synth_dataset(sc);
}

TrainConfig small_train() {
  TrainConfig cfg;
  cfg.batch_size = 10;
  cfg.max_epochs = 30;
  cfg.lr = 1e-2;
  cfg.word_dim = 16;
  cfg.common_dim = 16;
  cfg.adjacency = "softplus";
  return cfg;
}

}  // namespace

TEST_SUITE("retrieval") {
  TEST_CASE("rank examples") {
    Matrix s(5, 5, 0.1);
    for (std::size_t i = 0; i < 5; ++i) s(i, i) = 0.9;
    const std::vector<std::vector<std::size_t>> diag{{0}, {1}, {2}, {3}, {4}};
    CHECK(rank_queries(s, diag) == std::vector<std::size_t>(5, 1));

    const Matrix last{{0.5, 0.4, 0.3, 0.2, 0.1}};
    const std::vector<std::vector<std::size_t>> gt{{4}};
    CHECK(rank_queries(last, gt) == std::vector<std::size_t>{5});

    // Ties go to the lower gallery index.
    const Matrix tie{{0.5, 0.5, 0.5}};
    const std::vector<std::vector<std::size_t>> t2{{2}};
    CHECK(rank_queries(tie, t2) == std::vector<std::size_t>{3});
  }

  TEST_CASE("rank errors") {
    const Matrix s(2, 3, 0.0);
    const std::vector<std::vector<std::size_t>> empty_pos{{0}, {}};
    CHECK_THROWS_AS(rank_queries(s, empty_pos), ConfigError);
    const std::vector<std::vector<std::size_t>> oob{{0}, {3}};
    CHECK_THROWS_AS(rank_queries(s, oob), ConfigError);
    const std::vector<std::vector<std::size_t>> short_gt{{0}};
    CHECK_THROWS_AS(rank_queries(s, short_gt), ConfigError);
  }

  TEST_CASE("ranks agree with a sorting oracle") {
    Rng rng(1, "rank");
    for (int t = 0; t < 200; ++t) {
      const std::size_t q = 1 + rng.below(50), g = 2 + rng.below(49);
      Matrix s = rng.uniform_matrix(q, g, -1.0, 1.0);
      // Some coarse values so ties actually happen.
      if (t % 2) for (auto& x : s.data()) x = std::round(x * 4.0) / 4.0;
      std::vector<std::vector<std::size_t>> gt(q);
      for (std::size_t i = 0; i < q; ++i) {
        gt[i].push_back(rng.below(g));
        if (rng.below(3) == 0) gt[i].push_back(rng.below(g));
      }
      const auto ranks = rank_queries(s, gt);
      for (std::size_t i = 0; i < q; ++i) CHECK(ranks[i] == rank_oracle(s, i, gt[i]));
    }
  }

  TEST_CASE("report examples") {
    const std::vector<std::size_t> ranks{1, 2, 3, 1};
    const RetrievalReport r = report(ranks);
    CHECK(r.r1 == 50.0);
    CHECK(r.r5 == 100.0);
    CHECK(r.r10 == 100.0);
    CHECK(r.med_r == 1.5);
    CHECK(r.mean_r == 1.75);
    CHECK(r.sum_of_recalls == 250.0);

    const std::vector<std::size_t> ones(7, 1);
    CHECK(report(ones, Direction::kVideoToText).sum_of_recalls == 300.0);
    CHECK(report(ones, Direction::kVideoToText).direction == Direction::kVideoToText);

    const std::vector<std::size_t> odd{7, 12, 3};
    const RetrievalReport o = report(odd);
    CHECK(o.med_r == 7.0);
    CHECK(std::abs(o.r5 - 100.0 / 3.0) < 1e-12);
    CHECK(std::abs(o.r10 - 200.0 / 3.0) < 1e-12);
    CHECK(o.mean_r == 22.0 / 3.0);
  }

  TEST_CASE("attention map") {
    Matrix z{{1, 0}, {0.9, 0.1}, {0.5, 0.5}, {0, 1}};
    const AttentionMap a = attention_map(z);
    std::vector<double> sorted = a.scores;
    std::sort(sorted.rbegin(), sorted.rend());
    const std::vector<double> want{16.0 / 30, 9.0 / 30, 4.0 / 30, 1.0 / 30};
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(sorted[i] - want[i]) < 1e-15);
    // The most similar region gets rank 0 and the top score.
    const std::size_t top = std::max_element(a.similarity.begin(), a.similarity.end()) - a.similarity.begin();
    CHECK(a.ranks[top] == 0);
    CHECK(a.scores[top] == sorted[0]);

    CHECK(attention_map(Matrix{{0.3, -2.0}}).scores == std::vector<double>{1.0});
    CHECK_THROWS_AS(attention_map(Matrix{{1, 0}, {-1, 0}}), DegenerateInputError);
    CHECK_THROWS_AS(attention_map(Matrix(0, 2)), EmptyInputError);

    Rng rng(2, "attn");
    const AttentionMap big = attention_map(rng.normal_matrix(36, 5));
    const double sum = std::accumulate(big.scores.begin(), big.scores.end(), 0.0);
    CHECK(std::abs(sum - 1.0) < 1e-12);
    CHECK(*std::max_element(big.scores.begin(), big.scores.end()) * 16206.0 == doctest::Approx(1296.0));
  }

  TEST_CASE("random model ranks near chance") {
    const Dataset ds = data(Split::kTest, 100, 100);
    const Checkpoint ck = initial_checkpoint(small_train(), 8, ds.vocab_size);
    const Evaluation e = evaluate(ck, ds);
    INFO("t2v mean rank " << e.text_to_video.mean_r << " v2t " << e.video_to_text.mean_r);
    CHECK(e.text_to_video.mean_r >= 35.0);
    CHECK(e.text_to_video.mean_r <= 65.0);
  }

  TEST_CASE("evaluation is deterministic and training helps") {
    const Dataset train_set = data(Split::kTrain, 40), val_set = data(Split::kVal, 20);
    const TrainResult r = train(train_set, val_set, small_train());
    const Evaluation a = evaluate(r.last, train_set), b = evaluate(r.last, train_set);
    CHECK(a.text_to_video == b.text_to_video);
    CHECK(a.video_to_text == b.video_to_text);
    const Checkpoint untrained = initial_checkpoint(small_train(), 8, train_set.vocab_size);
    const Evaluation u = evaluate(untrained, train_set);
    CHECK(a.text_to_video.sum_of_recalls > u.text_to_video.sum_of_recalls);
    CHECK(a.video_to_text.sum_of_recalls > u.video_to_text.sum_of_recalls);

    const Evaluation with_attn = evaluate(r.last, train_set, true);
    CHECK(with_attn.attention.size() == 40 * 2 * 4);
    CHECK(with_attn.text_to_video == a.text_to_video);
  }

  TEST_CASE("evaluation rejects mismatched data") {
    const Checkpoint ck = initial_checkpoint(small_train(), 8, 60);
    SynthConfig sc;
    sc.num_pairs = 4;
    sc.regions = 2;
    sc.feature_dim = 9;
    sc.vocab_size = 60;
    sc.topics = 2;
    sc.frames = 1;
    CHECK_THROWS_AS(evaluate(ck, synth_dataset(sc)), ShapeError);
    sc.feature_dim = 8;
    sc.vocab_size = 80;
    CHECK_THROWS_AS(evaluate(ck, synth_dataset(sc)), VocabularyError);
  }

  TEST_CASE("csv output") {
    RetrievalReport r;
    r.r1 = 12.5;
    r.r5 = 40;
    r.r10 = 60;
    r.med_r = 7.5;
    r.mean_r = 10.25;
    r.sum_of_recalls = 112.5;
    RetrievalReport v = r;
    v.direction = Direction::kVideoToText;
    const std::vector<RetrievalReport> reports{r, v};
    CHECK(reports_csv(reports) ==
          "direction,r1,r5,r10,medr,meanr,sumr\n"
          "text-to-video,12.5000,40.0000,60.0000,7.5000,10.2500,112.5000\n"
          "video-to-text,12.5000,40.0000,60.0000,7.5000,10.2500,112.5000\n");

    const auto path = std::filesystem::temp_directory_path() / "visern_test_attn.csv";
    const std::vector<AttentionRow> rows{{"vid1", 0, 2, 0, 0.5}};
    write_attention_csv(path, rows);
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    std::getline(in, line);
    CHECK(header == "video_id,frame_index,region_index,rank,score");
    CHECK(line == "vid1,0,2,0,0.5");
  }
}
