#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace misr::nn;

namespace {

template <class T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  EXPECT_EQ(a.shape, b.shape);
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(static_cast<double>(a.data[i] - b.data[i])));
  return d;
}

}  // namespace

TEST(Conv, OneByOneIdentity) {
  const auto x = oracle::random_tensor<double>(Shape{2, 3, 7, 5}, 1);
  Tensor<double> w(Shape{3, 3, 1, 1});
  for (int c = 0; c < 3; ++c) w.at(c, c, 0, 0) = 1;
  const auto y = conv2d_forward(x, w, Tensor<double>(Shape{1, 3, 1, 1}));
  EXPECT_EQ(y.data, x.data);
}

TEST(Conv, AveragingKernelOnConstant) {
  // Interior pixels average nine ones; corners see four, edges six.
  Tensor<double> x(Shape{1, 1, 5, 5}, 1.0);
  Tensor<double> w(Shape{1, 1, 3, 3}, 1.0 / 9);
  const auto y = conv2d_forward(x, w, Tensor<double>(Shape{1, 1, 1, 1}));
  EXPECT_NEAR(y.at(0, 0, 2, 2), 1.0, 1e-15);
  EXPECT_NEAR(y.at(0, 0, 0, 0), 4.0 / 9, 1e-15);
  EXPECT_NEAR(y.at(0, 0, 0, 2), 6.0 / 9, 1e-15);
}

TEST(Conv, MatchesDirectOracle) {
  for (auto [cin, cout, k] : {std::tuple{5, 7, 5}, std::tuple{4, 3, 3}, std::tuple{2, 2, 1}}) {
    const auto x = oracle::random_tensor<double>(Shape{2, cin, 9, 6}, 10 + k);
    const auto w = oracle::random_tensor<double>(Shape{cout, cin, k, k}, 20 + k);
    const auto b = oracle::random_tensor<double>(Shape{1, cout, 1, 1}, 30 + k);
    EXPECT_LT(max_abs_diff(conv2d_forward(x, w, b), oracle::conv(x, w, b)), 1e-12);
  }
}

TEST(Conv, RejectsBadShapes) {
  const Tensor<float> x(Shape{1, 3, 4, 4});
  EXPECT_THROW(conv2d_forward(x, Tensor<float>(Shape{2, 4, 3, 3}), Tensor<float>(Shape{1, 2, 1, 1})), misr::ShapeError);
  EXPECT_THROW(conv2d_forward(x, Tensor<float>(Shape{2, 3, 2, 2}), Tensor<float>(Shape{1, 2, 1, 1})), misr::ShapeError);
  EXPECT_THROW(conv2d_forward(x, Tensor<float>(Shape{2, 3, 3, 3}), Tensor<float>(Shape{1, 3, 1, 1})), misr::ShapeError);
}

TEST(Deconv, MatchesScatterOracle) {
  for (auto [k, s, p] : {std::tuple{9, 3, 3}, std::tuple{3, 3, 0}, std::tuple{6, 2, 2}, std::tuple{5, 1, 2}}) {
    const auto x = oracle::random_tensor<double>(Shape{2, 3, 5, 4}, 40 + k);
    const auto w = oracle::random_tensor<double>(Shape{3, 4, k, k}, 50 + k);
    const auto b = oracle::random_tensor<double>(Shape{1, 4, 1, 1}, 60 + k);
    const auto y = deconv2d_forward(x, w, b, s, p);
    EXPECT_EQ(y.shape, (Shape{2, 4, 5 * s, 4 * s}));
    EXPECT_LT(max_abs_diff(y, oracle::deconv(x, w, b, s, p)), 1e-12);
  }
}

TEST(Deconv, DeltaKernelReplicatesPixel) {
  // A kernel that is one on the central 3x3 block copies each input pixel to
  // its 3x3 output block.
  Tensor<double> w(Shape{1, 1, 9, 9});
  for (int y = 3; y < 6; ++y)
    for (int x = 3; x < 6; ++x) w.at(0, 0, y, x) = 1;
  const auto in = oracle::random_tensor<double>(Shape{1, 1, 4, 4}, 7);
  const auto out = deconv2d_forward(in, w, Tensor<double>(Shape{1, 1, 1, 1}), 3, 3);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) ASSERT_EQ(out.at(0, 0, y, x), in.at(0, 0, y / 3, x / 3));
}

TEST(Deconv, IsAdjointOfStridedConv) {
  // <deconv(x), z> == <x, deconv^T(z)>, with the transpose given by the
  // input gradient.
  const auto x = oracle::random_tensor<double>(Shape{1, 3, 4, 4}, 71);
  const auto w = oracle::random_tensor<double>(Shape{3, 2, 9, 9}, 72);
  const auto z = oracle::random_tensor<double>(Shape{1, 2, 12, 12}, 73);
  const auto y = deconv2d_forward(x, w, Tensor<double>(Shape{1, 2, 1, 1}), 3, 3);
  const auto g = deconv2d_backward(x, w, z, 3, 3);
  EXPECT_NEAR(gradcheck::dot(y, z), gradcheck::dot(x, g.dx), 1e-10);
}

TEST(Deconv, RejectsUnsupportedGeometry) {
  const Tensor<float> x(Shape{1, 2, 4, 4});
  const Tensor<float> b(Shape{1, 3, 1, 1});
  EXPECT_THROW(deconv2d_forward(x, Tensor<float>(Shape{2, 3, 9, 9}), b, 3, 2), misr::ShapeError);
  EXPECT_THROW(deconv2d_forward(x, Tensor<float>(Shape{2, 3, 8, 8}), b, 3, 3), misr::ShapeError);
  EXPECT_THROW(deconv2d_forward(x, Tensor<float>(Shape{3, 3, 9, 9}), b, 3, 3), misr::ShapeError);
}

TEST(GradCheck, EveryLayerInDouble) {
  for (const auto& r : gradcheck::all_layers()) {
    SCOPED_TRACE(r.layer);
    EXPECT_LT(r.error, 1e-6);
  }
}

TEST(GradCheck, SmallConvsReachTighterBound) {
  EXPECT_LT(gradcheck::conv<double>(3, 4, 3, 5, 3), 1e-7);
  EXPECT_LT(gradcheck::deconv<double>(2, 3, 6, 2, 2, 3, 5), 1e-7);
}

TEST(GradCheck, FloatLayersAgreeWithDouble) {
  // Worst error relative to the largest gradient entry.
  const auto rel = [](const Tensor<float>& f, const Tensor<double>& d) {
    double diff = 0, scale = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      diff = std::max(diff, std::fabs(static_cast<double>(f.data[i]) - d.data[i]));
      scale = std::max(scale, std::fabs(d.data[i]));
    }
    return diff / scale;
  };
  const auto x = oracle::random_tensor<double>(Shape{2, 16, 12, 12}, 81);
  const auto w = oracle::random_tensor<double>(Shape{8, 16, 3, 3}, 82, 0.1);
  const auto dy = oracle::random_tensor<double>(Shape{2, 8, 12, 12}, 83);
  const auto gd = conv2d_backward(x, w, dy);
  const auto gf = conv2d_backward(x.cast<float>(), w.cast<float>(), dy.cast<float>());
  EXPECT_LT(rel(gf.dx, gd.dx), 1e-4);
  EXPECT_LT(rel(gf.dw, gd.dw), 1e-4);
  EXPECT_LT(rel(gf.db, gd.db), 1e-4);

  const auto xd = oracle::random_tensor<double>(Shape{2, 9, 8, 8}, 84);
  const auto wd = oracle::random_tensor<double>(Shape{9, 16, 9, 9}, 85, 0.1);
  const auto dyd = oracle::random_tensor<double>(Shape{2, 16, 24, 24}, 86);
  const auto hd = deconv2d_backward(xd, wd, dyd, 3, 3);
  const auto hf = deconv2d_backward(xd.cast<float>(), wd.cast<float>(), dyd.cast<float>(), 3, 3);
  EXPECT_LT(rel(hf.dx, hd.dx), 1e-4);
  EXPECT_LT(rel(hf.dw, hd.dw), 1e-4);
  EXPECT_LT(rel(hf.db, hd.db), 1e-4);
}

TEST(Loss, Examples) {
  const std::vector<double> pred{0.5, 0.5, 0.5, 0.5};
  const std::vector<double> target{0.5, 0.7, 0.1, 0.5};
  const auto all = masked_mse_loss<double>(pred, target, {});
  EXPECT_NEAR(all->loss, (0.04 + 0.16) / 4, 1e-15);
  const std::vector<std::uint8_t> mask{1, 1, 0, 1};
  const auto masked = masked_mse_loss<double>(pred, target, mask);
  EXPECT_NEAR(masked->loss, 0.04 / 3, 1e-15);
  EXPECT_EQ(masked->counted, 3u);
  EXPECT_EQ(masked->grad[2], 0.0);
  EXPECT_NEAR(masked->grad[1], 2 * -0.2 / 3, 1e-15);
  const std::vector<std::uint8_t> none{0, 0, 0, 0};
  EXPECT_FALSE(masked_mse_loss<double>(pred, target, none).has_value());
  EXPECT_THROW(masked_mse_loss<double>(pred, std::vector<double>(3), {}), misr::ShapeError);
}

TEST(Loss, ConcealedTargetsDoNotMatter) {
  const std::vector<double> pred{0.1, 0.2, 0.3};
  const std::vector<std::uint8_t> mask{1, 0, 1};
  const auto a = masked_mse_loss<double>(pred, std::vector<double>{0.0, 0.0, 0.0}, mask);
  const auto b = masked_mse_loss<double>(pred, std::vector<double>{0.0, 9.0, 0.0}, mask);
  EXPECT_EQ(a->loss, b->loss);
  EXPECT_EQ(a->grad, b->grad);
}

TEST(ChannelMean, AveragesChannels) {
  Tensor<double> x(Shape{1, 4, 1, 2});
  for (int c = 0; c < 4; ++c) {
    x.at(0, c, 0, 0) = c;
    x.at(0, c, 0, 1) = 1;
  }
  const auto y = channel_mean_forward(x);
  EXPECT_EQ(y.at(0, 0, 0, 0), 1.5);
  EXPECT_EQ(y.at(0, 0, 0, 1), 1.0);
}
