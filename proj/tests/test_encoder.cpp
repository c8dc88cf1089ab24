// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "pathsage/encoder.hpp"
#include "pathsage/error.hpp"
#include "test_util.hpp"

namespace pathsage {
namespace {

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor<double>& t, std::size_t rows, std::size_t cols) {
  Mat m(rows, std::vector<double>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m[r][c] = t.data()[r * cols + c];
  }
  return m;
}

std::vector<double> to_vec(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

Mat affine(const Mat& x, const Tensor<double>& w, const Tensor<double>& b) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  Mat W = to_mat(w, in, out);
  auto B = to_vec(b);
  Mat y(x.size(), std::vector<double>(out));
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t j = 0; j < out; ++j) {
      double s = B[j];
      for (std::size_t k = 0; k < in; ++k) s += x[r][k] * W[k][j];
      y[r][j] = s;
    }
  }
  return y;
}

Mat norm(const Mat& x, const Tensor<double>& gain, const Tensor<double>& bias) {
  auto g = to_vec(gain), b = to_vec(bias);
  Mat y = x;
  for (auto& row : y) {
    double mean = 0, var = 0;
    for (double v : row) mean += v;
    mean /= row.size();
    for (double v : row) var += (v - mean) * (v - mean);
    var /= row.size();
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean) / std::sqrt(var + 1e-5) * g[j] + b[j];
  }
  return y;
}

// Straight-line forward of one path: projection, positions, post-norm
// layers, token-0 readout. Also returns attention weights per layer/head.
std::vector<double> oracle(const EncoderParams<double>& p, const Mat& feats, std::vector<Mat>* attn) {
  const std::size_t s = feats.size(), d = p.hidden, h = p.heads, hd = d / h;
  Mat x = affine(feats, p.input_w, p.input_b);
  for (std::size_t t = 0; t < s; ++t) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / d);
      x[t][i] += std::sin(t * freq);
      x[t][i + 1] += std::cos(t * freq);
    }
  }
  for (const auto& L : p.layers) {
    Mat q = affine(x, L.wq, L.bq), k = affine(x, L.wk, L.bk), v = affine(x, L.wv, L.bv);
    Mat ctx(s, std::vector<double>(d, 0.0));
    for (std::size_t head = 0; head < h; ++head) {
      Mat w(s, std::vector<double>(s));
      for (std::size_t i = 0; i < s; ++i) {
        double z = 0;
        for (std::size_t j = 0; j < s; ++j) {
          double dot = 0;
          for (std::size_t c = head * hd; c < (head + 1) * hd; ++c) dot += q[i][c] * k[j][c];
          w[i][j] = std::exp(dot / std::sqrt(static_cast<double>(hd)));
          z += w[i][j];
        }
        for (std::size_t j = 0; j < s; ++j) w[i][j] /= z;
        for (std::size_t c = head * hd; c < (head + 1) * hd; ++c) {
          for (std::size_t j = 0; j < s; ++j) ctx[i][c] += w[i][j] * v[j][c];
        }
      }
      if (attn) attn->push_back(w);
    }
    Mat a = affine(ctx, L.wo, L.bo);
    for (std::size_t i = 0; i < s; ++i) {
      for (std::size_t c = 0; c < d; ++c) a[i][c] += x[i][c];
    }
    x = norm(a, L.ln1_gain, L.ln1_bias);
    Mat f = affine(x, L.ff1_w, L.ff1_b);
    for (auto& row : f) {
      for (auto& z : row) z = std::max(z, 0.0);
    }
    f = affine(f, L.ff2_w, L.ff2_b);
    for (std::size_t i = 0; i < s; ++i) {
      for (std::size_t c = 0; c < d; ++c) f[i][c] += x[i][c];
    }
    x = norm(f, L.ln2_gain, L.ln2_bias);
  }
  return x[0];
}

void set_identity(Tensor<double>& w) {
  std::fill(w.data().begin(), w.data().end(), 0.0);
  const std::size_t rows = w.dim(0), cols = w.dim(1);
  for (std::size_t i = 0; i < std::min(rows, cols); ++i) w.data()[i * cols + i] = 1.0;
}

Tensor<double> features_of(const Mat& m) {
  std::vector<double> flat;
  for (const auto& row : m) flat.insert(flat.end(), row.begin(), row.end());
  return Tensor<double>::from({m.size(), m[0].size()}, flat);
}

TEST(PositionTable, Values) {
  PositionTable t = build_position_table(9, 8);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(t.at(0, j), j % 2 == 0 ? 0.0 : 1.0);
  EXPECT_NEAR(t.at(1, 0), 0.84147, 1e-5);
  EXPECT_NEAR(t.at(1, 1), 0.54030, 1e-5);
  PositionTable small = build_position_table(3, 4);
  EXPECT_NEAR(small.at(2, 2), std::sin(0.02), 1e-12);
  EXPECT_NEAR(small.at(2, 3), std::cos(0.02), 1e-12);
  EXPECT_EQ(build_position_table(9, 8).values, t.values);
  try {
    build_position_table(4, 7);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOddDimension);
  }
}

TEST(Encoder, IdentityParamsMatchOracle) {
  Rng rng(1);
  auto p = EncoderParams<double>::init(8, 8, 2, 1, rng);
  auto& L = p.layers[0];
  for (Tensor<double>* w : {&p.input_w, &L.wq, &L.wk, &L.wv, &L.wo, &L.ff1_w, &L.ff2_w}) set_identity(*w);
  for (Tensor<double>* b : {&p.input_b, &L.bq, &L.bk, &L.bv, &L.bo, &L.ff1_b, &L.ff2_b}) {
    std::fill(b->data().begin(), b->data().end(), 0.0);
  }
  Mat feats(2, std::vector<double>(8, 0.0));
  feats[0][0] = 1.0;
  feats[1][1] = 1.0;
  Tape<double> tape(false);
  auto out = encode_path(tape, p, build_position_table(3, 8), features_of(feats), {}, rng);
  auto expected = oracle(p, feats, nullptr);
  ASSERT_EQ(out.repr.shape(), (Shape{1, 8}));
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(out.repr.data()[j], expected[j], 1e-9);
}

TEST(Encoder, RandomParamsMatchOracle) {
  Rng rng(2);
  auto p = EncoderParams<double>::init(5, 12, 3, 2, rng);
  // Non-trivial biases and norms.
  for (auto& L : p.layers) {
    for (Tensor<double>* t : {&L.bq, &L.bo, &L.ff1_b, &L.ln1_gain, &L.ln2_bias}) {
      for (auto& v : t->data()) v += rng.uniform(-0.5, 0.5);
    }
  }
  Mat feats(4, std::vector<double>(5));
  for (auto& row : feats) {
    for (auto& v : row) v = rng.uniform(-1, 1);
  }
  Tape<double> tape(false);
  auto out = encode_path(tape, p, build_position_table(6, 12), features_of(feats), {}, rng);
  std::vector<Mat> attn;
  auto expected = oracle(p, feats, &attn);
  for (std::size_t j = 0; j < 12; ++j) EXPECT_NEAR(out.repr.data()[j], expected[j], 1e-9);
  ASSERT_EQ(attn.size(), 2u * 3u);
  for (std::size_t layer = 0; layer < 2; ++layer) {
    for (std::size_t h = 0; h < 3; ++h) {
      for (std::size_t i = 0; i < 4; ++i) {
        double row = 0;
        for (std::size_t j = 0; j < 4; ++j) {
          EXPECT_NEAR(out.attention.weight(layer, 0, h, i, j), attn[layer * 3 + h][i][j], 1e-9);
          row += out.attention.weight(layer, 0, h, i, j);
        }
        EXPECT_NEAR(row, 1.0, 1e-5);
      }
    }
  }
}

TEST(Encoder, SingleTokenAttentionIsOne) {
  Rng rng(3);
  auto p = EncoderParams<float>::init(3, 8, 2, 2, rng);
  Tape<float> tape(false);
  auto out = encode_path(tape, p, build_position_table(2, 8), Tensor<float>::from({1, 3}, {0.1f, 0.2f, 0.3f}), {},
                         rng);
  for (std::size_t layer = 0; layer < 2; ++layer) {
    for (std::size_t h = 0; h < 2; ++h) EXPECT_EQ(out.attention.weight(layer, 0, h, 0, 0), 1.0f);
  }
}

TEST(Encoder, PositionSensitive) {
  Rng rng(4);
  auto p = EncoderParams<double>::init(4, 8, 2, 1, rng);
  Mat feats(4, std::vector<double>(4));
  for (auto& row : feats) {
    for (auto& v : row) v = rng.uniform(-1, 1);
  }
  Mat swapped = feats;
  std::swap(swapped[1], swapped[3]);
  Tape<double> tape(false);
  auto table = build_position_table(5, 8);
  auto a = encode_path(tape, p, table, features_of(feats), {}, rng).repr;
  auto b = encode_path(tape, p, table, features_of(swapped), {}, rng).repr;
  double diff = 0;
  for (std::size_t j = 0; j < 8; ++j) diff += std::abs(a.data()[j] - b.data()[j]);
  EXPECT_GT(diff, 1e-6);
}

TEST(Encoder, InferenceIsDeterministic) {
  Rng rng(5);
  auto p = EncoderParams<float>::init(4, 16, 4, 2, rng);
  auto feats = Tensor<float>::from({3, 4}, std::vector<float>(12, 0.25f));
  Tape<float> tape(false);
  auto table = build_position_table(4, 16);
  Rng r1(1), r2(2);
  auto a = encode_path(tape, p, table, feats, {0.5, false}, r1).repr;
  auto b = encode_path(tape, p, table, feats, {0.5, false}, r2).repr;
  for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(a.data()[j], b.data()[j]);
}

TEST(Encoder, Errors) {
  Rng rng(6);
  auto p = EncoderParams<float>::init(4, 8, 2, 1, rng);
  Tape<float> tape(false);
  auto table = build_position_table(3, 8);
  try {
    encode_path(tape, p, table, Tensor<float>::zeros({4, 4}), {}, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPathTooLong);
  }
  try {
    encode_path(tape, p, table, Tensor<float>::zeros({2, 5}), {}, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(Encoder, GradientsMatchFiniteDifferences) {
  Rng rng(7);
  auto p = EncoderParams<double>::init(3, 8, 2, 1, rng);
  std::vector<NamedTensor<double>> params;
  p.append_parameters(params, "encoder.");
  auto feats = testing::random_tensor({2, 3, 3}, rng, false);
  auto table = build_position_table(3, 8).as_tensor<double>();
  auto w = testing::random_tensor({2, 8}, rng, false);
  auto f = [&](Tape<double>& tape) {
    Rng unused(0);
    auto repr = encode_paths(tape, p, table, feats, {0.0, false}, unused);
    return ops::sum(tape, ops::mul(tape, repr, w));
  };
  // Small step: the feed-forward ReLU has kinks close to some inputs.
  auto r = testing::finite_difference_check(params, f, 1e-6, 1e-3);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

TEST(Encoder, ParameterNamesAndShapes) {
  Rng rng(8);
  auto p = EncoderParams<float>::init(6, 16, 4, 2, rng);
  std::vector<NamedTensor<float>> params;
  p.append_parameters(params, "");
  ASSERT_EQ(params.size(), 2u + 2u * 16u);
  EXPECT_EQ(params[0].name, "input.weight");
  EXPECT_EQ(params[0].tensor.shape(), (Shape{6, 16}));
  std::size_t ffn = 0;
  for (const auto& np : params) {
    if (np.tensor.shape() == Shape{16, 64}) ++ffn;
  }
  EXPECT_EQ(ffn, 2u);
}

}  // namespace
}  // namespace pathsage
