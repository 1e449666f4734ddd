#include "actrans/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "actrans/rng.hpp"
#include "actrans/ssbr/losses.hpp"
#include "actrans/ssbr/model.hpp"

namespace actrans::gradcheck {

namespace {

constexpr double kStep = 1e-5;

// ||a - b||_2 / max(||a||_2 + ||b||_2, eps)
double rel_err(const Eigen::VectorXd& analytic, const Eigen::VectorXd& fd) {
  const double num = (analytic - fd).norm();
  const double den = std::max(analytic.norm() + fd.norm(), 1e-12);
  return num / den;
}

using ScoreMatD = ssbr::ScoreMat<double>;

double check_score_loss(
    const std::function<double(const ScoreMatD&)>& loss,
    const std::function<ScoreMatD(const ScoreMatD&)>& grad, int seeds) {
  double worst = 0.0;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(1000 + seed);
    ScoreMatD scores(2, 5);
    for (Eigen::Index i = 0; i < scores.size(); ++i)
      scores.data()[i] = rng.uniform(-1.0, 1.0);

    const ScoreMatD g = grad(scores);
    Eigen::VectorXd analytic(scores.size()), fd(scores.size());
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
      analytic[i] = g.data()[i];
      ScoreMatD plus = scores, minus = scores;
      plus.data()[i] += kStep;
      minus.data()[i] -= kStep;
      fd[i] = (loss(plus) - loss(minus)) / (2.0 * kStep);
    }
    worst = std::max(worst, rel_err(analytic, fd));
  }
  return worst;
}

ScoreMatD random_bm_deltas(Rng& rng, int k, int p) {
  ScoreMatD bmd(k, p - 1);
  for (Eigen::Index i = 0; i < bmd.size(); ++i)
    bmd.data()[i] = rng.uniform(0.0, 1.0);
  return bmd;
}

double check_acl(int seeds) {
  // Tiny scorer in double precision; gradients are taken w.r.t. the
  // generated batch's pixels.
  ssbr::SsbrArch arch;
  arch.depth = 2;
  arch.base_channels = 4;
  arch.input_h = 12;
  arch.input_w = 12;

  double worst = 0.0;
  for (int seed = 0; seed < seeds; ++seed) {
    ssbr::SsbrNet<double> net(arch);
    Rng init(2000 + seed);
    net.init(init);

    const int j = 2;
    Rng rng(3000 + seed);
    nn::Tensor<double> real(j, 1, arch.input_h, arch.input_w);
    nn::Tensor<double> fake(j, 1, arch.input_h, arch.input_w);
    for (Eigen::Index i = 0; i < real.count(); ++i)
      real.data[i] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < fake.count(); ++i)
      fake.data[i] = rng.uniform(-1.0, 1.0);

    const auto acl = [&](const nn::Tensor<double>& f) {
      const auto cr = net.forward(real);
      const auto cf = net.forward(f);
      double loss = 0.0;
      for (int i = 0; i < j; ++i)
        loss += std::abs(cr.scores.data[i] - cf.scores.data[i]);
      return loss / j;
    };

    // Analytic input gradient.
    const auto cr = net.forward(real);
    auto cf = net.forward(fake);
    nn::Tensor<double> dscores(j, 1, 1, 1);
    for (int i = 0; i < j; ++i) {
      const double diff = cf.scores.data[i] - cr.scores.data[i];
      dscores.data[i] = (diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0)) / j;
    }
    const nn::Tensor<double> dfake = net.backward(cf, dscores, false);

    Eigen::VectorXd analytic(fake.count()), fd(fake.count());
    for (Eigen::Index i = 0; i < fake.count(); ++i) {
      analytic[i] = dfake.data[i];
      nn::Tensor<double> plus = fake, minus = fake;
      plus.data[i] += kStep;
      minus.data[i] -= kStep;
      fd[i] = (acl(plus) - acl(minus)) / (2.0 * kStep);
    }
    worst = std::max(worst, rel_err(analytic, fd));
  }
  return worst;
}

}  // namespace

std::vector<CheckResult> run_all(double tolerance) {
  const int seeds = 10;
  std::vector<CheckResult> out;

  out.push_back({"loss_order",
                 check_score_loss(
                     [](const ScoreMatD& s) { return ssbr::loss_order(s); },
                     [](const ScoreMatD& s) { return ssbr::loss_order_grad(s); },
                     seeds),
                 false});

  out.push_back({"loss_norm",
                 check_score_loss(
                     [](const ScoreMatD& s) { return ssbr::loss_norm(s); },
                     [](const ScoreMatD& s) { return ssbr::loss_norm_grad(s); },
                     seeds),
                 false});

  {
    double worst = 0.0;
    for (int seed = 0; seed < seeds; ++seed) {
      Rng brng(4000 + seed);
      const ScoreMatD bmd = random_bm_deltas(brng, 2, 5);
      worst = std::max(
          worst,
          check_score_loss(
              [&](const ScoreMatD& s) { return ssbr::loss_anat(s, bmd); },
              [&](const ScoreMatD& s) { return ssbr::loss_anat_grad(s, bmd); },
              1));
    }
    out.push_back({"loss_anat", worst, false});
  }

  {
    ssbr::LossWeights w;
    double worst = 0.0;
    for (int seed = 0; seed < seeds; ++seed) {
      Rng brng(5000 + seed);
      const ScoreMatD bmd = random_bm_deltas(brng, 2, 5);
      worst = std::max(
          worst, check_score_loss(
                     [&](const ScoreMatD& s) {
                       return ssbr::loss_ssbr(s, bmd, w);
                     },
                     [&](const ScoreMatD& s) {
                       return ssbr::loss_ssbr_grad(s, bmd, w);
                     },
                     1));
    }
    out.push_back({"loss_ssbr", worst, false});
  }

  out.push_back({"loss_acl_pixels", check_acl(seeds), false});

  for (auto& r : out) r.pass = r.max_rel_err <= tolerance;
  return out;
}

}  // namespace actrans::gradcheck
