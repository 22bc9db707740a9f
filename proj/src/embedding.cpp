#include "visern/embedding.hpp"

#include <cmath>

#include "visern/error.hpp"

namespace visern {

VideoEncoderParams VideoEncoderParams::random(std::size_t d, std::size_t common_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  return VideoEncoderParams{rng.uniform_matrix(d, common_dim, -bound, bound),
                            Matrix(1, common_dim)};
}

TextEncoderParams TextEncoderParams::random(std::size_t vocab, std::size_t word_dim,
                                            std::size_t common_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(word_dim));
  TextEncoderParams p;
  p.embedding = rng.uniform_matrix(vocab, word_dim, -1.0, 1.0);
  p.w = rng.uniform_matrix(word_dim, common_dim, -bound, bound);
  p.b = Matrix(1, common_dim);
  return p;
}

const char* to_string(Reduction r) { return r == Reduction::kMean ? "mean" : "sum"; }

Reduction parse_reduction(const std::string& name) {
  if (name == "sum") return Reduction::kSum;
  if (name == "mean") return Reduction::kMean;
  throw ConfigError("unknown reduction '" + name + "' (expected sum or mean)");
}

Matrix encode_video(std::span<const Matrix> frame_features, const VideoEncoderParams& p) {
  if (frame_features.empty()) throw EmptyInputError("encode_video: no frames");
  Matrix pooled(1, frame_features.front().cols());
  for (const auto& f : frame_features) pooled += f;
  pooled *= 1.0 / static_cast<double>(frame_features.size());
  Matrix out = matmul(pooled, p.w);
  out += p.b;
  return out;
}

VideoEncoderGrads encode_video_backward(std::span<const Matrix> frame_features,
                                        const VideoEncoderParams& p, const Matrix& grad_out) {
  if (frame_features.empty()) throw EmptyInputError("encode_video_backward: no frames");
  Matrix pooled(1, frame_features.front().cols());
  for (const auto& f : frame_features) pooled += f;
  pooled *= 1.0 / static_cast<double>(frame_features.size());
  VideoEncoderGrads g;
  g.w = matmul_tn(pooled, grad_out);
  g.b = grad_out;
  g.frame_feature = matmul_nt(grad_out, p.w);
  g.frame_feature *= 1.0 / static_cast<double>(frame_features.size());
  return g;
}

Matrix encode_text(const Caption& c, const TextEncoderParams& p) {
  if (c.token_ids.empty()) throw EmptyInputError("encode_text: empty caption");
  Matrix pooled(1, p.embedding.cols());
  for (auto t : c.token_ids) {
    if (t >= p.embedding.rows()) {
      throw VocabularyError("token id " + std::to_string(t) + " outside vocabulary of " +
                            std::to_string(p.embedding.rows()));
    }
    auto src = p.embedding.row(t);
    for (std::size_t k = 0; k < src.size(); ++k) pooled(0, k) += src[k];
  }
  pooled *= 1.0 / static_cast<double>(c.token_ids.size());
  Matrix out = matmul(pooled, p.w);
  out += p.b;
  return out;
}

void encode_text_backward(const Caption& c, const TextEncoderParams& p, const Matrix& grad_out,
                          TextEncoderParams& grads) {
  const double inv = 1.0 / static_cast<double>(c.token_ids.size());
  Matrix pooled(1, p.embedding.cols());
  for (auto t : c.token_ids) {
    auto src = p.embedding.row(t);
    for (std::size_t k = 0; k < src.size(); ++k) pooled(0, k) += src[k];
  }
  pooled *= inv;
  grads.w += matmul_tn(pooled, grad_out);
  grads.b += grad_out;
  const Matrix grad_pooled = matmul_nt(grad_out, p.w);
  for (auto t : c.token_ids) {
    auto dst = grads.embedding.row(t);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += inv * grad_pooled(0, k);
  }
}

Matrix similarity_matrix(const Matrix& videos, const Matrix& texts) {
  if (videos.cols() != texts.cols())
    throw ShapeError("similarity_matrix: " + videos.shape_string() + " vs " + texts.shape_string());
  Matrix s(videos.rows(), texts.rows());
  for (std::size_t i = 0; i < videos.rows(); ++i)
    for (std::size_t j = 0; j < texts.rows(); ++j) s(i, j) = cosine(videos.row(i), texts.row(j));
  return s;
}

SimilarityGrads similarity_backward(const Matrix& videos, const Matrix& texts,
                                    const Matrix& grad_s) {
  SimilarityGrads g{Matrix(videos.rows(), videos.cols()), Matrix(texts.rows(), texts.cols())};
  std::vector<double> vn(videos.rows()), tn(texts.rows());
  for (std::size_t i = 0; i < videos.rows(); ++i) vn[i] = norm2(videos.row(i));
  for (std::size_t j = 0; j < texts.rows(); ++j) tn[j] = norm2(texts.row(j));
  const std::size_t dim = videos.cols();
  for (std::size_t i = 0; i < videos.rows(); ++i) {
    for (std::size_t j = 0; j < texts.rows(); ++j) {
      const double gij = grad_s(i, j);
      if (gij == 0.0) continue;
      if (vn[i] == 0.0 || tn[j] == 0.0) throw DegenerateInputError("similarity: zero-norm embedding");
      const auto a = videos.row(i);
      const auto b = texts.row(j);
      const double s = dot(a, b) / (vn[i] * tn[j]);
      // ds/da = b / (|a||b|) - s a / |a|^2
      for (std::size_t k = 0; k < dim; ++k) {
        g.videos(i, k) += gij * (b[k] / (vn[i] * tn[j]) - s * a[k] / (vn[i] * vn[i]));
        g.texts(j, k) += gij * (a[k] / (vn[i] * tn[j]) - s * b[k] / (tn[j] * tn[j]));
      }
    }
  }
  return g;
}

TripletLoss triplet_loss_hard(const Matrix& s, const LossConfig& cfg) {
  if (s.rows() != s.cols()) throw ShapeError("triplet_loss_hard: " + s.shape_string());
  const std::size_t b = s.rows();
  TripletLoss out;
  out.grad = Matrix(b, b);
  out.hardest_video.assign(b, 0);
  out.hardest_text.assign(b, 0);
  const double scale = cfg.reduction == Reduction::kMean && b > 0 ? 1.0 / static_cast<double>(b) : 1.0;
  for (std::size_t i = 0; i < b; ++i) {
    out.hardest_video[i] = i;
    out.hardest_text[i] = i;
    if (b == 1) continue;

    // Hardest negative video for text i: column i; hardest negative text
    // for video i: row i. Strict comparison keeps the lowest index on ties.
    std::size_t kv = i == 0 ? 1 : 0;
    std::size_t kt = kv;
    for (std::size_t k = 0; k < b; ++k) {
      if (k == i) continue;
      if (s(k, i) > s(kv, i)) kv = k;
      if (s(i, k) > s(i, kt)) kt = k;
    }
    out.hardest_video[i] = kv;
    out.hardest_text[i] = kt;

    const double video_term = cfg.margin - s(i, i) + s(kv, i);
    const double text_term = cfg.margin - s(i, i) + s(i, kt);
    if (video_term > 0.0) {
      out.value += scale * video_term;
      out.grad(i, i) -= scale;
      out.grad(kv, i) += scale;
    }
    if (text_term > 0.0) {
      out.value += scale * text_term;
      out.grad(i, i) -= scale;
      out.grad(i, kt) += scale;
    }
  }
  return out;
}

}  // namespace visern
