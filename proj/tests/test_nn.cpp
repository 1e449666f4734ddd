#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "actrans/nn/adam.hpp"
#include "actrans/nn/checkpoint.hpp"
#include "actrans/nn/ops.hpp"
#include "test_util.hpp"

using namespace actrans;
using Td = nn::Tensor<double>;

namespace {

Td random_tensor(int n, int c, int h, int w, Rng& rng, double lo = -1.0,
                 double hi = 1.0) {
  Td t(n, c, h, w);
  for (Eigen::Index i = 0; i < t.count(); ++i)
    t.data[i] = rng.uniform(lo, hi);
  return t;
}

// Naive direct convolution, the oracle for the im2col path.
Td conv_naive(const Td& x, const nn::Param<double>& w,
              const nn::Param<double>& b, int stride, int pad) {
  const int co = w.value.n(), ci = w.value.c(), k = w.value.h();
  const int oh = nn::conv_out_dim(x.h(), k, stride, pad);
  const int ow = nn::conv_out_dim(x.w(), k, stride, pad);
  Td y = Td::zeros(x.n(), co, oh, ow);
  for (int n = 0; n < x.n(); ++n)
    for (int o = 0; o < co; ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double s = b.value.data[o];
          for (int c = 0; c < ci; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                s += x.at(n, c, iy, ix) * w.value.at(o, c, ky, kx);
              }
          y.at(n, o, oy, ox) = s;
        }
  return y;
}

constexpr double kFdStep = 1e-6;

double dot(const Td& a, const Td& b) { return (a.data * b.data).sum(); }

// Relative error helper used by all the layer checks below.
double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(a.norm() + b.norm(), 1e-12);
}

// FD gradient of f w.r.t. every entry of `t`.
template <typename F>
Eigen::VectorXd fd_grad(Td& t, F f) {
  Eigen::VectorXd g(t.count());
  for (Eigen::Index i = 0; i < t.count(); ++i) {
    const double old = t.data[i];
    t.data[i] = old + kFdStep;
    const double up = f();
    t.data[i] = old - kFdStep;
    const double down = f();
    t.data[i] = old;
    g[i] = (up - down) / (2 * kFdStep);
  }
  return g;
}

}  // namespace

TEST_CASE("conv2d matches the naive convolution oracle") {
  Rng rng(101);
  for (const int stride : {1, 2}) {
    const Td x = random_tensor(2, 3, 9, 7, rng);
    nn::Param<double> w, b;
    w.init_shape(4, 3, 3, 3);
    b.init_shape(4, 1, 1, 1);
    nn::he_init(w, rng);
    for (Eigen::Index i = 0; i < b.value.count(); ++i)
      b.value.data[i] = rng.uniform(-0.5, 0.5);

    const Td y = nn::conv2d(x, w, b, stride, 1);
    const Td ref = conv_naive(x, w, b, stride, 1);
    REQUIRE(y.shape == ref.shape);
    for (Eigen::Index i = 0; i < y.count(); ++i)
      CHECK(y.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d backward matches finite differences") {
  Rng rng(102);
  for (const int stride : {1, 2}) {
    Td x = random_tensor(2, 2, 6, 6, rng);
    nn::Param<double> w, b;
    w.init_shape(3, 2, 3, 3);
    b.init_shape(3, 1, 1, 1);
    nn::he_init(w, rng);
    nn::zero_init(b);
    const Td r = random_tensor(2, 3, nn::conv_out_dim(6, 3, stride, 1),
                               nn::conv_out_dim(6, 3, stride, 1), rng);

    const auto loss = [&] { return dot(nn::conv2d(x, w, b, stride, 1), r); };
    w.grad.data.setZero();
    b.grad.data.setZero();
    const Td dx = nn::conv2d_backward(x, w, b, r, stride, 1, true);

    CHECK(rel(Eigen::VectorXd(dx.data.matrix()), fd_grad(x, loss)) < 1e-8);
    CHECK(rel(Eigen::VectorXd(w.grad.data.matrix()), fd_grad(w.value, loss)) <
          1e-8);
    CHECK(rel(Eigen::VectorXd(b.grad.data.matrix()), fd_grad(b.value, loss)) <
          1e-8);
  }
}

TEST_CASE("instance norm normalizes and its backward matches FD") {
  Rng rng(103);
  Td x = random_tensor(2, 3, 5, 5, rng, -2.0, 2.0);
  nn::Param<double> g, bt;
  g.init_shape(3, 1, 1, 1);
  bt.init_shape(3, 1, 1, 1);
  for (int c = 0; c < 3; ++c) {
    g.value.data[c] = rng.uniform(0.5, 1.5);
    bt.value.data[c] = rng.uniform(-0.5, 0.5);
  }

  nn::InstNormCtx<double> ctx;
  const Td y = nn::instnorm(x, g, bt, ctx);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      const auto p = y.plane(n, c);
      const double mean = p.sum() / p.size();
      CHECK(mean == doctest::Approx(bt.value.data[c]).epsilon(1e-6));
    }

  const Td r = random_tensor(2, 3, 5, 5, rng);
  const auto loss = [&] {
    nn::InstNormCtx<double> c2;
    return dot(nn::instnorm(x, g, bt, c2), r);
  };
  g.grad.data.setZero();
  bt.grad.data.setZero();
  const Td dx = nn::instnorm_backward(ctx, g, bt, r, true);
  CHECK(rel(Eigen::VectorXd(dx.data.matrix()), fd_grad(x, loss)) < 1e-6);
  CHECK(rel(Eigen::VectorXd(g.grad.data.matrix()), fd_grad(g.value, loss)) <
        1e-6);
  CHECK(rel(Eigen::VectorXd(bt.grad.data.matrix()), fd_grad(bt.value, loss)) <
        1e-6);
}

TEST_CASE("pointwise and pooling backwards match FD") {
  Rng rng(104);
  Td x = random_tensor(2, 2, 4, 4, rng, -1.5, 1.5);
  const Td r = random_tensor(2, 2, 4, 4, rng);

  SUBCASE("leaky relu") {
    const Td y = nn::leaky_relu(x, 0.2);
    const Td dx = nn::leaky_relu_backward(y, r, 0.2);
    const auto loss = [&] { return dot(nn::leaky_relu(x, 0.2), r); };
    CHECK(rel(Eigen::VectorXd(dx.data.matrix()), fd_grad(x, loss)) < 1e-7);
  }
  SUBCASE("relu via slope zero") {
    const Td y = nn::leaky_relu(x, 0.0);
    const Td dx = nn::leaky_relu_backward(y, r, 0.0);
    const auto loss = [&] { return dot(nn::leaky_relu(x, 0.0), r); };
    CHECK(rel(Eigen::VectorXd(dx.data.matrix()), fd_grad(x, loss)) < 1e-7);
  }
  SUBCASE("tanh") {
    const Td y = nn::tanh_op(x);
    const Td dx = nn::tanh_backward(y, r);
    const auto loss = [&] { return dot(nn::tanh_op(x), r); };
    CHECK(rel(Eigen::VectorXd(dx.data.matrix()), fd_grad(x, loss)) < 1e-7);
  }
  SUBCASE("clamp") {
    const Td dx = nn::clamp_backward(x, r, -1.0, 1.0);
    const auto loss = [&] { return dot(nn::clamp_op(x, -1.0, 1.0), r); };
    CHECK(rel(Eigen::VectorXd(dx.data.matrix()), fd_grad(x, loss)) < 1e-7);
  }
  SUBCASE("upsample2x") {
    const Td dx = nn::upsample2x_backward(
        random_tensor(2, 2, 8, 8, rng));  // shape only
    CHECK(dx.h() == 4);
    const Td r8 = random_tensor(2, 2, 8, 8, rng);
    const Td dxr = nn::upsample2x_backward(r8);
    const auto loss = [&] { return dot(nn::upsample2x(x), r8); };
    CHECK(rel(Eigen::VectorXd(dxr.data.matrix()), fd_grad(x, loss)) < 1e-7);
  }
  SUBCASE("global average pool") {
    const Td rp = random_tensor(2, 2, 1, 1, rng);
    const Td dx = nn::global_avg_pool_backward(rp, 4, 4);
    const auto loss = [&] { return dot(nn::global_avg_pool(x), rp); };
    CHECK(rel(Eigen::VectorXd(dx.data.matrix()), fd_grad(x, loss)) < 1e-7);
  }
}

TEST_CASE("linear backward matches FD") {
  Rng rng(105);
  Td x = random_tensor(3, 5, 1, 1, rng);
  nn::Param<double> w, b;
  w.init_shape(2, 5, 1, 1);
  b.init_shape(2, 1, 1, 1);
  nn::he_init(w, rng);
  for (Eigen::Index i = 0; i < b.value.count(); ++i)
    b.value.data[i] = rng.uniform(-0.3, 0.3);
  const Td r = random_tensor(3, 2, 1, 1, rng);

  const auto loss = [&] { return dot(nn::linear(x, w, b), r); };
  w.grad.data.setZero();
  b.grad.data.setZero();
  const Td dx = nn::linear_backward(x, w, b, r, true);
  CHECK(rel(Eigen::VectorXd(dx.data.matrix()), fd_grad(x, loss)) < 1e-8);
  CHECK(rel(Eigen::VectorXd(w.grad.data.matrix()), fd_grad(w.value, loss)) <
        1e-8);
  CHECK(rel(Eigen::VectorXd(b.grad.data.matrix()), fd_grad(b.value, loss)) <
        1e-8);
}

TEST_CASE("adam first step matches the hand-computed update") {
  nn::Param<double> p;
  p.init_shape(1, 1, 1, 1);
  p.value.data[0] = 1.0;
  p.grad.data[0] = 1.0;
  nn::ParamRefs<double> params{&p};
  nn::Adam<double> adam(params, 0.1, 0.9, 0.999);
  adam.step(params);
  // mhat = vhat = 1 after bias correction, so the step is lr / (1 + eps).
  CHECK(p.value.data[0] == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8))
                               .epsilon(1e-12));
}

TEST_CASE("checkpoint round trip preserves manifest and tensors") {
  const auto dir = testutil::temp_dir("nn");
  nn::Checkpoint ckpt;
  ckpt.manifest.set("kind", "test");
  ckpt.manifest.set_int("steps_done", 7);
  ckpt.manifest.set_double("lr", 2e-4);
  Rng rng(106);
  nn::Tensor<float> t(2, 3, 4, 5);
  for (Eigen::Index i = 0; i < t.count(); ++i)
    t.data[i] = static_cast<float>(rng.uniform(-1, 1));
  ckpt.tensors.emplace_back("layer.w", t);

  const auto path = dir / "test.ckpt";
  nn::save_checkpoint(ckpt, path);
  const nn::Checkpoint r = nn::load_checkpoint(path);
  CHECK(r.manifest.at("kind") == "test");
  CHECK(r.manifest.get_int("steps_done") == 7);
  CHECK(r.manifest.get_double("lr") == doctest::Approx(2e-4));
  const auto& rt = r.tensor("layer.w");
  REQUIRE(rt.shape == t.shape);
  for (Eigen::Index i = 0; i < t.count(); ++i) CHECK(rt.data[i] == t.data[i]);

  // Serialization is deterministic byte for byte.
  CHECK(nn::checkpoint_bytes(ckpt) == nn::checkpoint_bytes(r));
}

TEST_CASE("truncated checkpoint is rejected") {
  const auto dir = testutil::temp_dir("nn");
  nn::Checkpoint ckpt;
  ckpt.manifest.set("kind", "test");
  nn::Tensor<float> t = nn::Tensor<float>::zeros(1, 1, 2, 2);
  ckpt.tensors.emplace_back("w", t);
  const auto path = dir / "trunc.ckpt";
  nn::save_checkpoint(ckpt, path);
  std::string bytes = testutil::read_file_bytes(path);
  bytes.resize(bytes.size() - 6);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  os.close();
  CHECK_THROWS_AS(nn::load_checkpoint(path), truncation_error);
}
