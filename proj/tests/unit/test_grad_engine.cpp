#include <chrono>
#include <cstring>

#include "doctest.h"
#include "gradient_oracle.hpp"
#include "test_support.hpp"
#include "vlo/error.hpp"
#include "vlo/gradcheck.hpp"
#include "vlo/objective.hpp"
#include "vlo/tape.hpp"

using namespace vlo;
using vlo::test::Rng;

namespace {

Grid scalar_grid(double x) { return Grid(1, 1, 1, x); }

bool bit_equal(const Grid& a, const Grid& b) {
  return a.same_shape(b) && std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("square at 3") {
  ad::Tape tape;
  const ad::Var x = tape.variable(scalar_grid(3.0));
  const ad::Var y = ad::square(tape, x);
  tape.backward(y);
  CHECK(tape.scalar(y) == 9.0);
  CHECK(tape.gradient(x)(0, 0) == 6.0);
}

TEST_CASE("fidelity subgradient at a single pixel") {
  Grid sparse(4, 5, 1, 0.0);
  sparse(2, 3) = 5.0;
  const SparseDepthMap sm(sparse);
  ad::Tape tape;
  const ad::Var d = tape.variable(Grid(4, 5, 1, 7.0));
  tape.backward(depth_fidelity_op(tape, sm, d));
  const Grid& g = tape.gradient(d);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 5; ++c) CHECK(g(r, c) == (r == 2 && c == 3 ? 1.0 : 0.0));

  ad::Tape t2;
  const ad::Var e = t2.variable(Grid(4, 5, 1, 5.0));
  t2.backward(depth_fidelity_op(t2, sm, e));
  CHECK(t2.gradient(e)(2, 3) == 0.0);
}

TEST_CASE("backward needs a scalar root") {
  ad::Tape tape;
  const ad::Var x = tape.variable(Grid(2, 2, 1, 1.0));
  try {
    tape.backward(ad::square(tape, x));
    FAIL("non-scalar root accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
}

TEST_CASE("unused variables get zero gradient") {
  ad::Tape tape;
  const ad::Var x = tape.variable(scalar_grid(2.0));
  const ad::Var unused = tape.variable(Grid(3, 3, 1, 4.0));
  tape.backward(ad::exp(tape, x));
  CHECK(tape.gradient(x)(0, 0) == std::exp(2.0));
  const Grid& g = tape.gradient(unused);
  CHECK(g.height() == 3);
  for (double v : g.values()) CHECK(v == 0.0);
}

TEST_CASE("gradient of a sum is the sum of gradients") {
  // Dyadic inputs keep every partial sum exact.
  Grid x0(1, 4, 1);
  x0(0, 0) = -1.5;
  x0(0, 1) = 0.25;
  x0(0, 2) = 2.0;
  x0(0, 3) = -0.75;
  auto grad_of = [&](int which) {
    ad::Tape tape;
    const ad::Var x = tape.variable(x0);
    const ad::Var f = ad::sum(tape, ad::square(tape, x));
    const ad::Var g = ad::scale(tape, ad::sum(tape, ad::mul(tape, x, x)), 0.5);
    const ad::Var h = ad::mean(tape, ad::scale(tape, x, 3.0));
    std::vector<ad::Var> terms;
    if (which & 1) terms.push_back(f);
    if (which & 2) terms.push_back(g);
    if (which & 4) terms.push_back(h);
    tape.backward(ad::linear_combination(tape, terms, std::vector<double>(terms.size(), 1.0)));
    return tape.gradient(x);
  };
  const Grid all = grad_of(7), a = grad_of(1), b = grad_of(2), c = grad_of(4);
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == a[i] + b[i] + c[i]);
  CHECK(a[0] == -3.0);
  CHECK(c[0] == 0.75);
}

TEST_CASE("finite differences of a linear function") {
  Rng rng(32);
  Grid x = rng.grid(4, 4, 1, -1, 1);
  const Grid a = rng.grid(4, 4, 1, -3, 3);
  Grid analytic;
  auto f = [&](ad::Tape& tape, ad::Var& v) {
    v = tape.variable(x);
    return ad::sum(tape, ad::mul(tape, v, tape.constant(a)));
  };
  {
    ad::Tape tape;
    ad::Var v;
    tape.backward(f(tape, v));
    analytic = tape.gradient(v);
  }
  std::vector<ad::FdTarget> targets{{"x", &x, &analytic, 1e-3, {}}};
  const ad::FdReport rep = ad::finite_difference_check(
      [&] {
        ad::Tape tape;
        ad::Var v;
        return tape.scalar(f(tape, v));
      },
      targets);
  CHECK(rep.checked == 16);
  CHECK(rep.max_rel_error <= 1e-10);
}

TEST_CASE("finite difference harness catches a wrong gradient") {
  Grid x(1, 2, 1, 1.0);
  Grid wrong(1, 2, 1, 0.0);
  wrong(0, 0) = 2.0;
  wrong(0, 1) = 3.0;
  std::vector<ad::FdTarget> targets{{"x", &x, &wrong, 1e-4, {}}};
  const ad::FdReport rep = ad::finite_difference_check([&] { return x(0, 0) * x(0, 0) + x(0, 1); }, targets);
  CHECK(rep.max_rel_error > 0.5);
  CHECK(rep.worst.index == 1);
  CHECK(x(0, 0) == 1.0);
}

TEST_CASE("non-deterministic objectives are rejected") {
  Grid x(1, 1, 1, 1.0);
  Grid g(1, 1, 1, 1.0);
  std::vector<ad::FdTarget> targets{{"x", &x, &g, 1e-4, {}}};
  int calls = 0;
  try {
    ad::finite_difference_check([&] { return x(0, 0) + 1e-3 * ++calls; }, targets);
    FAIL("drifting objective accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDeterminism);
  }
}

TEST_CASE("backward is deterministic") {
  test::GradConfig g = test::make_grad_config(5);
  auto run = [&] {
    ad::Tape tape;
    const BranchVars a{tape.variable(g.depth), {tape.variable(g.poses[0]), tape.variable(g.poses[1])}};
    const BranchVars b{tape.variable(g.depth_f), {tape.variable(g.poses_f[0]), tape.variable(g.poses_f[1])}};
    tape.backward(siamese_objective(tape, g.s, g.sf, a, b, g.w).root);
    return std::vector<Grid>{tape.gradient(a.depth), tape.gradient(a.poses[0]), tape.gradient(b.depth),
                             tape.gradient(b.poses[1])};
  };
  const auto x = run(), y = run();
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(bit_equal(x[i], y[i]));
}

TEST_CASE("objective terms match finite differences") {
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    test::GradConfig g = test::make_grad_config(seed);
    for (const test::TermReport& r : test::check_grad_config(g, 64)) {
      INFO("seed " << seed << " term " << r.term << " worst index " << r.fd.worst.index << " analytic "
                   << r.fd.worst.analytic << " numeric " << r.fd.worst.numeric);
      CHECK(r.fd.checked > 0);
      CHECK(r.fd.max_rel_error <= 1e-4);
    }
  }
  MESSAGE("three configurations in "
          << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s");
}

TEST_CASE("pose gradient vanishes at the true pose") {
  // Fronto-parallel plane at 10 m; tx = +-0.5 m shifts by exactly two pixels.
  const int h = 16, w = 48, nc = 3;
  Rng rng(33);
  const Grid wide = rng.grid(h, w + 4, nc, 0.0, 1.0);
  auto crop = [&](int offset) {
    Grid out(h, w, nc);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        for (int ch = 0; ch < nc; ++ch) out(r, c, ch) = wide(r, c + offset, ch);
    return Image(out);
  };
  const Intrinsics k = make_intrinsics(40, 40, 23.5, 7.5, w, h);
  Grid sparse(h, w, 1, 0.0);
  for (int c = 0; c < w; c += 3) sparse(5, c) = 10.0;
  const Snippet s{crop(2), {crop(0), crop(4)}, SparseDepthMap(sparse), k};
  const Snippet sf = flip_snippet(s);

  const Pose6 p1(0.5, 0, 0, 0, 0, 0), p2(-0.5, 0, 0, 0, 0, 0);
  ad::Tape tape;
  const Grid depth(h, w, 1, 10.0);
  const BranchVars a{tape.constant(depth), {tape.variable(pose_to_grid(p1)), tape.variable(pose_to_grid(p2))}};
  const BranchVars b{tape.constant(hflip(depth)),
                     {tape.variable(pose_to_grid(flip_pose(p1))), tape.variable(pose_to_grid(flip_pose(p2)))}};
  const Objective o = siamese_objective(tape, s, sf, a, b, LossWeights{});
  CHECK(o.breakdown.vs <= 1e-12);
  tape.backward(o.root);
  double worst = 0.0;
  for (const ad::Var& p : {a.poses[0], a.poses[1], b.poses[0], b.poses[1]})
    for (double v : tape.gradient(p).values()) worst = std::max(worst, std::abs(v));
  CHECK(worst <= 1e-6);
}
