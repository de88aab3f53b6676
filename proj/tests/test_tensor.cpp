#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gr1/nn.hpp"
#include "gr1/tensor.hpp"

using namespace gr1;

using G = Graph<double>;
using Mat = MatX<double>;

namespace {

Mat random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal(0, scale);
  return m;
}

// Central finite differences of a scalar graph function wrt one parameter.
template <class F>
double max_rel_grad_error(Param<double>& p, F&& build, double eps = 1e-6) {
  p.zero_grad();
  {
    G g;
    auto loss = build(g);
    g.backward(loss);
  }
  Mat analytic = p.grad;
  double worst = 0;
  for (int r = 0; r < p.value.rows(); ++r)
    for (int c = 0; c < p.value.cols(); ++c) {
      double keep = p.value(r, c);
      p.value(r, c) = keep + eps;
      G gp;
      double up = gp.value(build(gp))(0, 0);
      p.value(r, c) = keep - eps;
      G gm;
      double down = gm.value(build(gm))(0, 0);
      p.value(r, c) = keep;
      double fd = (up - down) / (2 * eps);
      double denom = std::max({std::abs(fd), std::abs(analytic(r, c)), 1e-4});
      worst = std::max(worst, std::abs(fd - analytic(r, c)) / denom);
    }
  return worst;
}

}  // namespace

TEST_CASE("matmul forward and gradient") {
  Rng rng(1);
  Param<double> a{"a", random_mat(3, 4, rng), Mat::Zero(3, 4), true};
  Param<double> b{"b", random_mat(4, 2, rng), Mat::Zero(4, 2), true};
  {
    G g;
    auto out = g.matmul(g.param(a), g.param(b));
    CHECK(g.value(out).isApprox(a.value * b.value));
  }
  double err_a = max_rel_grad_error(a, [&](G& g) {
    return g.mean_all(g.matmul(g.param(a), g.param(b)));
  });
  double err_b = max_rel_grad_error(b, [&](G& g) {
    return g.mean_all(g.matmul(g.param(a), g.param(b)));
  });
  CHECK(err_a < 1e-6);
  CHECK(err_b < 1e-6);
}

TEST_CASE("elementwise ops and broadcasting gradients") {
  Rng rng(2);
  Param<double> a{"a", random_mat(4, 5, rng), Mat::Zero(4, 5), true};
  Param<double> row{"row", random_mat(1, 5, rng), Mat::Zero(1, 5), true};
  auto build = [&](G& g) {
    auto x = g.add_row(g.param(a), g.param(row));
    x = g.gelu(x);
    x = g.hadamard(x, x);
    return g.mean_all(x);
  };
  CHECK(max_rel_grad_error(a, build) < 1e-5);
  CHECK(max_rel_grad_error(row, build) < 1e-5);
}

TEST_CASE("tanh, relu, scale, sub, slice, concat gradients") {
  Rng rng(3);
  Param<double> a{"a", random_mat(6, 4, rng), Mat::Zero(6, 4), true};
  auto build = [&](G& g) {
    auto x = g.param(a);
    auto top = g.slice_rows(x, 0, 3);
    auto bottom = g.slice_rows(x, 3, 3);
    auto joined = g.concat_cols({g.tanh_op(top), g.relu(bottom)});
    auto re = g.concat_rows({joined, g.scale(joined, -0.5)});
    return g.mean_all(g.sub(re, g.scale(re, 0.25)));
  };
  CHECK(max_rel_grad_error(a, build) < 1e-5);
}

TEST_CASE("layernorm matches a direct computation and its gradient") {
  Rng rng(4);
  Param<double> a{"a", random_mat(3, 8, rng), Mat::Zero(3, 8), true};
  Param<double> gamma{"g", random_mat(1, 8, rng), Mat::Zero(1, 8), true};
  Param<double> beta{"b", random_mat(1, 8, rng), Mat::Zero(1, 8), true};
  {
    G g;
    auto out = g.layernorm(g.param(a), g.param(gamma), g.param(beta));
    for (int r = 0; r < 3; ++r) {
      double mean = a.value.row(r).mean();
      double var = (a.value.row(r).array() - mean).square().mean();
      for (int c = 0; c < 8; ++c) {
        double xh = (a.value(r, c) - mean) / std::sqrt(var + 1e-5);
        CHECK(g.value(out)(r, c) ==
              doctest::Approx(xh * gamma.value(0, c) + beta.value(0, c))
                  .epsilon(1e-9));
      }
    }
  }
  auto build = [&](G& g) {
    return g.mean_all(g.hadamard(
        g.layernorm(g.param(a), g.param(gamma), g.param(beta)),
        g.layernorm(g.param(a), g.param(gamma), g.param(beta))));
  };
  CHECK(max_rel_grad_error(a, build) < 1e-5);
  CHECK(max_rel_grad_error(gamma, build) < 1e-5);
  CHECK(max_rel_grad_error(beta, build) < 1e-5);
}

TEST_CASE("masked softmax zeroes disallowed entries and empty rows") {
  Rng rng(5);
  Param<double> a{"a", random_mat(3, 4, rng), Mat::Zero(3, 4), true};
  std::vector<uint8_t> mask = {
      1, 1, 0, 0,
      0, 0, 0, 0,
      1, 1, 1, 1,
  };
  {
    G g;
    auto out = g.masked_softmax(g.param(a), mask);
    Mat v = g.value(out);
    CHECK(v(0, 2) == 0.0);
    CHECK(v(0, 3) == 0.0);
    CHECK(v(0, 0) + v(0, 1) == doctest::Approx(1.0));
    CHECK(v.row(1).cwiseAbs().sum() == 0.0);
    CHECK(v.row(2).sum() == doctest::Approx(1.0));
  }
  auto build = [&](G& g) {
    auto soft = g.masked_softmax(g.param(a), mask);
    return g.mean_all(g.hadamard(soft, soft));
  };
  CHECK(max_rel_grad_error(a, build) < 1e-5);
}

TEST_CASE("loss ops match closed forms and gradients") {
  Rng rng(6);
  Param<double> p{"p", random_mat(4, 3, rng), Mat::Zero(4, 3), true};
  Mat target = random_mat(4, 3, rng);

  {
    G g;
    auto l = g.mse_loss(g.param(p), target);
    CHECK(g.value(l)(0, 0) ==
          doctest::Approx((p.value - target).array().square().mean()));
  }
  CHECK(max_rel_grad_error(p, [&](G& g) {
          return g.mse_loss(g.param(p), target);
        }) < 1e-5);
  CHECK(max_rel_grad_error(p, [&](G& g) {
          return g.smooth_l1_loss(g.param(p), target);
        }) < 1e-4);

  Mat labels(4, 3);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c) labels(r, c) = (r + c) % 2;
  CHECK(max_rel_grad_error(p, [&](G& g) {
          return g.bce_with_logits(g.param(p), labels);
        }) < 1e-5);
}

TEST_CASE("dropout is identity in eval mode and rescales in training") {
  Rng rng(7);
  Mat x = random_mat(50, 40, rng);
  {
    G g(false, nullptr);
    auto out = g.dropout(g.input(x), 0.5);
    CHECK(g.value(out) == x);
  }
  {
    Rng drop_rng(3);
    G g(true, &drop_rng);
    auto out = g.dropout(g.input(x), 0.5);
    const Mat& v = g.value(out);
    int zeros = 0;
    for (int r = 0; r < v.rows(); ++r)
      for (int c = 0; c < v.cols(); ++c) {
        if (v(r, c) == 0.0)
          ++zeros;
        else
          CHECK(v(r, c) == doctest::Approx(2.0 * x(r, c)));
      }
    CHECK(zeros > 600);
    CHECK(zeros < 1400);
  }
}

TEST_CASE("attention block gradient flows through all projections") {
  Rng rng(8);
  ParamStore<double> store;
  auto attn = AttentionParams<double>::create(store, "attn", 8, 2, rng);
  Mat x = random_mat(5, 8, rng, 0.5);
  std::vector<uint8_t> mask(25, 0);
  for (int q = 0; q < 5; ++q)
    for (int k = 0; k <= q; ++k) mask[size_t(q) * 5 + k] = 1;

  auto build = [&](G& g) {
    auto out = attn.apply(g, g.input(x), g.input(x), &mask, 0.0);
    return g.mean_all(g.hadamard(out, out));
  };
  for (size_t i = 0; i < store.size(); ++i) {
    CAPTURE(store[i].name);
    CHECK(max_rel_grad_error(store[i], build) < 1e-5);
  }
}

TEST_CASE("adamw moves only trainable parameters and decays weights") {
  Rng rng(9);
  ParamStore<double> store;
  auto& w = store.add("w", 2, 2, true);
  auto& frozen = store.add("f", 2, 2, false);
  init_normal(w, rng, 1.0);
  init_normal(frozen, rng, 1.0);
  Mat w_before = w.value, f_before = frozen.value;

  AdamW<double> opt(store, {0.9, 0.95, 1e-8, 0.1});
  w.grad = Mat::Ones(2, 2);
  frozen.grad = Mat::Ones(2, 2);
  opt.step(0.01);
  CHECK(frozen.value == f_before);
  CHECK(w.value != w_before);

  // pure decay: zero gradient still shrinks weights
  ParamStore<double> store2;
  auto& w2 = store2.add("w", 1, 1, true);
  w2.value(0, 0) = 1.0;
  AdamW<double> opt2(store2, {0.9, 0.95, 1e-8, 0.5});
  w2.zero_grad();
  opt2.step(0.1);
  CHECK(w2.value(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5));
}
