#include <doctest.h>

#include <cstdlib>
#include <set>

#include "support.hpp"
#include "visern/model.hpp"

using namespace visern;

namespace {

ModelConfig small_config() {
  ModelConfig mc;
  mc.feature_dim = 5;
  mc.common_dim = 6;
  mc.word_dim = 4;
  mc.vocab_size = 12;
  return mc;
}

Dataset small_dataset(std::size_t pairs, std::uint64_t seed) {
  SynthConfig sc;
  sc.seed = seed;
  sc.num_pairs = pairs;
  sc.regions = 3;
  sc.feature_dim = 5;
  sc.vocab_size = 12;
  sc.topics = 4;
  sc.frames = 2;
  sc.caption_length = 3;
  return synth_dataset(sc);
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("parameter listing is stable and complete") {
    ModelParams p = ModelParams::init(small_config(), 1);
    const auto named = p.named();
    std::vector<std::string> names;
    for (const auto& [n, m] : named) names.push_back(n);
    CHECK(names == std::vector<std::string>{"embed.w_phi", "embed.b_phi", "embed.w_theta",
                                            "embed.b_theta", "gcn.w_g", "gcn.w_r", "video.w",
                                            "video.b", "text.embedding", "text.w", "text.b"});
    CHECK(p.text.embedding.rows() == 12);
    CHECK(p.text.embedding.cols() == 4);
    CHECK(p.video.w.rows() == 5);
    CHECK(p.video.w.cols() == 6);
  }

  TEST_CASE("init is seed-deterministic and initialisation ranges hold") {
    const ModelParams a = ModelParams::init(small_config(), 3), b = ModelParams::init(small_config(), 3),
                      c = ModelParams::init(small_config(), 4);
    const auto na = a.named(), nb = b.named(), nc = c.named();
    bool any_diff = false;
    for (std::size_t i = 0; i < na.size(); ++i) {
      CHECK(*na[i].second == *nb[i].second);
      any_diff = any_diff || !(*na[i].second == *nc[i].second);
    }
    CHECK(any_diff);
    const double bound = 1.0 / std::sqrt(5.0);
    for (double v : a.gcn.w_g.data()) CHECK(std::abs(v) <= bound);
    for (double v : a.embed.w_phi.data()) CHECK(std::abs(v) <= bound);
    for (double v : a.embed.b_phi.data()) CHECK(v == 0.0);
  }

  TEST_CASE("batch embedding equals per-item embedding") {
    const ModelConfig mc = small_config();
    const ModelParams p = ModelParams::init(mc, 2);
    const Dataset ds = small_dataset(6, 2);
    const Matrix vids = embed_videos(ds.videos, p, mc);
    const Matrix caps = embed_captions(ds.captions, p);
    for (std::size_t i = 0; i < 6; ++i) {
      const Matrix v = embed_video(ds.videos[i], p, mc);
      const Matrix t = embed_caption(ds.captions[i], p);
      for (std::size_t k = 0; k < 6; ++k) {
        CHECK(vids(i, k) == v(0, k));
        CHECK(caps(i, k) == t(0, k));
      }
    }
  }

  TEST_CASE("batch loss equals the triplet loss of the embedded batch") {
    const ModelConfig mc = small_config();
    const ModelParams p = ModelParams::init(mc, 5);
    const Dataset ds = small_dataset(5, 5);
    std::vector<const VideoSample*> vp;
    std::vector<const Caption*> cp;
    for (std::size_t i = 0; i < 5; ++i) {
      vp.push_back(&ds.videos[i]);
      cp.push_back(&ds.captions[i]);
    }
    const double got = batch_loss(p, mc, vp, cp);
    const Matrix s = similarity_matrix(embed_videos(ds.videos, p, mc), embed_captions(ds.captions, p));
    CHECK(std::abs(got - triplet_loss_hard(s, mc.loss).value) < 1e-12);
  }

  TEST_CASE("batch gradients do not depend on the worker count") {
    const ModelConfig mc = small_config();
    const ModelParams p = ModelParams::init(mc, 6);
    const Dataset ds = small_dataset(11, 6);
    std::vector<const VideoSample*> vp;
    std::vector<const Caption*> cp;
    for (std::size_t i = 0; i < 11; ++i) {
      vp.push_back(&ds.videos[i]);
      cp.push_back(&ds.captions[i]);
    }
    std::vector<ModelParams> grads;
    std::vector<double> losses;
    for (const char* threads : {"1", "3", "8"}) {
      ::setenv("VISERN_THREADS", threads, 1);
      ModelParams g;
      losses.push_back(batch_loss(p, mc, vp, cp, &g));
      grads.push_back(std::move(g));
    }
    ::unsetenv("VISERN_THREADS");
    for (std::size_t r = 1; r < grads.size(); ++r) {
      CHECK(losses[r] == losses[0]);
      const auto a = grads[0].named(), b = grads[r].named();
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].second == *b[i].second);
    }
  }
}
