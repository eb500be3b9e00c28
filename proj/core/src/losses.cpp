#include "vlo/losses.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>

#include "vlo/error.hpp"

namespace vlo {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

constexpr SsimConstants kSsim{};

struct SsimStats {
  Grid mx, my, exx, eyy, exy;
};

SsimStats ssim_stats(const Image& target, const Grid& y) {
  const Grid& x = target.grid();
  Grid yy(y.height(), y.width(), y.channels()), xy = yy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  return {target.box_mean(), box3_reflect(y), target.box_mean_sq(), box3_reflect(yy), box3_reflect(xy)};
}

void require_depth_shape(const Grid& depth, int height, int width, const char* op) {
  if (depth.channels() != 1 || depth.height() != height || depth.width() != width) {
    fail(ErrorCode::kInvalidArgument, std::string(op) + ": depth shape mismatch");
  }
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {vs, df, ds, fc, alpha_s, alpha_r, sigma}) {
    if (!std::isfinite(v) || v < 0.0) fail(ErrorCode::kInvalidArgument, "loss weights must be finite and >= 0");
  }
  if (!(sigma > 0.0)) fail(ErrorCode::kInvalidArgument, "sigma must be positive");
  if (alpha_s > 1.0) fail(ErrorCode::kInvalidArgument, "alpha_s must lie in [0, 1]");
}

std::string LossBreakdown::to_record() const {
  std::ostringstream os;
  os.precision(17);
  os << "vs=" << vs << " df=" << df << " ds=" << ds << " dfc=" << dfc << " pfc=" << pfc << " vlo=" << vlo
     << " total=" << total << " phi=" << phi;
  return os.str();
}

LossBreakdown LossBreakdown::parse_record(std::string_view text) {
  LossBreakdown b;
  const std::map<std::string, double*, std::less<>> fields{{"vs", &b.vs},   {"df", &b.df},   {"ds", &b.ds},
                                                           {"dfc", &b.dfc}, {"pfc", &b.pfc}, {"vlo", &b.vlo},
                                                           {"total", &b.total}, {"phi", &b.phi}};
  std::istringstream is{std::string(text)};
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kParse, "loss record token without '=': " + token);
    const auto it = fields.find(token.substr(0, eq));
    if (it == fields.end()) fail(ErrorCode::kParse, "unknown loss record field: " + token.substr(0, eq));
    try {
      *it->second = std::stod(token.substr(eq + 1));
    } catch (const std::exception&) {
      fail(ErrorCode::kParse, "non-numeric loss record value: " + token);
    }
  }
  return b;
}

Grid pose_to_grid(const Pose6& p) {
  Grid g(1, 1, Pose6::kSize);
  for (int i = 0; i < Pose6::kSize; ++i) g[static_cast<std::size_t>(i)] = p[i];
  return g;
}

Pose6 grid_to_pose(const Grid& g) {
  if (g.size() != Pose6::kSize) fail(ErrorCode::kInvalidArgument, "pose grid must hold six values");
  std::array<double, Pose6::kSize> v{};
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = g[i];
  return Pose6(v);
}

WarpNode warp_op(ad::Tape& tape, const Image& src, ad::Var depth, ad::Var pose, const Intrinsics& k,
                 const WarpPlan* frozen) {
  const Grid& d = tape.value(depth);
  if (src.height() != k.height || src.width() != k.width) {
    fail(ErrorCode::kInvalidArgument, "warp: source image does not match intrinsics");
  }
  auto plan = std::make_shared<WarpPlan>(plan_warp(d, grid_to_pose(tape.value(pose)), k, frozen));
  const int nc = src.channels();
  Grid out(k.height, k.width, nc, 0.0);
  for (std::size_t i = 0; i < plan->samples.size(); ++i) {
    const WarpSample& s = plan->samples[i];
    if (!s.valid) continue;
    for (int ch = 0; ch < nc; ++ch) out[i * nc + ch] = sample_cell(src.grid(), s, ch);
  }
  const Grid* src_grid = &src.grid();
  ad::Var image = tape.record(std::move(out), {depth, pose}, [=](ad::Tape& t, const Grid& g) {
    Grid* dd = t.grad_buffer(depth);
    Grid* dp = t.grad_buffer(pose);
    const Grid& dv = t.value(depth);
    const ProjectiveWarp warp(grid_to_pose(t.value(pose)), k);
    const Eigen::Matrix3d& rot = warp.rotation();
    const Eigen::Vector3d& tr = warp.translation();
    // Chain through the source-frame point: pose gradients reduce to sum(g) and sum(g x_t^T).
    Eigen::Vector3d g_trans = Eigen::Vector3d::Zero();
    Eigen::Matrix3d g_outer = Eigen::Matrix3d::Zero();
    const int w = k.width;
    for (std::size_t i = 0; i < plan->samples.size(); ++i) {
      const WarpSample& s = plan->samples[i];
      if (!s.valid) continue;
      double gu = 0.0, gv = 0.0;
      for (int ch = 0; ch < nc; ++ch) {
        const double go = g[i * nc + ch];
        if (go == 0.0) continue;
        const auto [iu, iv] = sample_cell_gradient(*src_grid, s, ch);
        gu += go * iu;
        gv += go * iv;
      }
      if (gu == 0.0 && gv == 0.0) continue;
      const int r = static_cast<int>(i / static_cast<std::size_t>(w));
      const int c = static_cast<int>(i % static_cast<std::size_t>(w));
      const Eigen::Vector3d ray((c - k.cx) / k.fx, (r - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d r_ray = rot * ray;
      const Eigen::Vector3d xs = dv[i] * r_ray + tr;
      const double iz = 1.0 / xs.z();
      const double gx = gu * k.fx * iz, gy = gv * k.fy * iz;
      const Eigen::Vector3d gxs(gx, gy, -(gx * xs.x() + gy * xs.y()) * iz);
      if (dd) (*dd)[i] += gxs.dot(r_ray);
      if (dp) {
        g_trans += gxs;
        g_outer.noalias() += gxs * (dv[i] * ray).transpose();
      }
    }
    if (dp) {
      for (int m = 0; m < 3; ++m) {
        (*dp)[static_cast<std::size_t>(m)] += g_trans[m];
        (*dp)[static_cast<std::size_t>(3 + m)] += warp.rotation_derivative(m).cwiseProduct(g_outer).sum();
      }
    }
  });
  return {image, *plan};
}

ad::Var photometric_op(ad::Tape& tape, const Image& target, const WarpNode& warped, double alpha_s) {
  const Grid& x = target.grid();
  const Grid& y = tape.value(warped.image);
  if (!x.same_shape(y)) fail(ErrorCode::kInvalidArgument, "photometric: target and warped image differ in shape");
  const Mask valid = warped.plan.mask();
  auto window_valid = std::make_shared<Mask>(erode3_reflect(valid));
  const std::size_t n_valid = valid.count(), n_window = window_valid->count();
  if (n_valid == 0 || n_window == 0) fail(ErrorCode::kDegenerateWarp, "no valid pixels after warping");

  const int nc = x.channels();
  const std::size_t n_pix = valid.bits().size();
  auto stats = std::make_shared<SsimStats>(ssim_stats(target, y));
  const std::uint8_t* vb = valid.bits().data();
  const std::uint8_t* wb = window_valid->bits().data();
  double l1 = 0.0, dssim = 0.0;
  for (std::size_t p = 0; p < n_pix; ++p) {
    for (int ch = 0; ch < nc; ++ch) {
      const std::size_t i = p * nc + ch;
      if (vb[p]) l1 += std::abs(x[i] - y[i]);
      if (!wb[p]) continue;
      const double ux = stats->mx[i], uy = stats->my[i];
      const double a1 = 2 * ux * uy + kSsim.c1;
      const double a2 = 2 * (stats->exy[i] - ux * uy) + kSsim.c2;
      const double b1 = ux * ux + uy * uy + kSsim.c1;
      const double b2 = (stats->exx[i] - ux * ux) + (stats->eyy[i] - uy * uy) + kSsim.c2;
      dssim += 1.0 - (a1 * a2) / (b1 * b2);
    }
  }
  const double l1_scale = (1.0 - alpha_s) / static_cast<double>(n_valid * nc);
  const double ssim_scale = alpha_s / static_cast<double>(n_window * nc);
  const double value = l1_scale * l1 + ssim_scale * dssim;

  const Grid* xt = &x;
  const ad::Var wimg = warped.image;
  auto valid_bits = std::make_shared<Mask>(valid);
  return tape.record(Grid::scalar(value), {wimg}, [=](ad::Tape& t, const Grid& g) {
    Grid* dy = t.grad_buffer(wimg);
    if (!dy) return;
    const Grid& yv = t.value(wimg);
    const Grid& xv = *xt;
    const double go = g[0];
    const std::uint8_t* vb = valid_bits->bits().data();
    const std::uint8_t* wb = window_valid->bits().data();
    // Partial derivatives of the per-pixel SSIM w.r.t. the window statistics of y.
    Grid d_mu(xv.height(), xv.width(), nc, 0.0), d_eyy = d_mu, d_exy = d_mu;
    const double coef = -go * ssim_scale;  // d(1 - S) = -dS
    const double l1_coef = go * l1_scale;
    for (std::size_t p = 0; p < n_pix; ++p) {
      for (int ch = 0; ch < nc; ++ch) {
        const std::size_t i = p * nc + ch;
        if (vb[p]) (*dy)[i] += l1_coef * sign(yv[i] - xv[i]);
        if (!wb[p]) continue;
        const double ux = stats->mx[i], uy = stats->my[i];
        const double a1 = 2 * ux * uy + kSsim.c1;
        const double a2 = 2 * (stats->exy[i] - ux * uy) + kSsim.c2;
        const double b1 = ux * ux + uy * uy + kSsim.c1;
        const double b2 = (stats->exx[i] - ux * ux) + (stats->eyy[i] - uy * uy) + kSsim.c2;
        const double inv_den = coef / (b1 * b2);
        const double s = a1 * a2 / (b1 * b2);
        const double dn_dmu = 2 * ux * a2 - 2 * ux * a1;
        const double dd_dmu = 2 * uy * b2 - 2 * uy * b1;
        d_mu[i] = (dn_dmu - s * dd_dmu) * inv_den;
        d_eyy[i] = (-s * b1) * inv_den;
        d_exy[i] = (2 * a1) * inv_den;
      }
    }
    const Grid a_mu = box3_reflect_adjoint(d_mu);
    const Grid a_yy = box3_reflect_adjoint(d_eyy);
    const Grid a_xy = box3_reflect_adjoint(d_exy);
    for (std::size_t i = 0; i < dy->size(); ++i) {
      (*dy)[i] += a_mu[i] + 2.0 * yv[i] * a_yy[i] + xv[i] * a_xy[i];
    }
  });
}

ad::Var view_synthesis_op(ad::Tape& tape, const Image& target, std::span<const Image> sources, ad::Var depth,
                          std::span<const ad::Var> poses, const Intrinsics& k, double alpha_s,
                          std::span<const WarpPlan> frozen, std::vector<WarpPlan>* plans_out) {
  if (sources.empty() || sources.size() != poses.size()) {
    fail(ErrorCode::kInvalidArgument, "view synthesis needs one pose per source view");
  }
  if (!frozen.empty() && frozen.size() != sources.size()) {
    fail(ErrorCode::kInvalidArgument, "view synthesis needs one frozen plan per source view");
  }
  require_depth_shape(tape.value(depth), target.height(), target.width(), "view synthesis");
  std::vector<ad::Var> terms;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (!sources[s].grid().same_shape(target.grid())) {
      fail(ErrorCode::kInvalidArgument, "view synthesis: source and target differ in shape");
    }
    WarpNode wn = warp_op(tape, sources[s], depth, poses[s], k, frozen.empty() ? nullptr : &frozen[s]);
    terms.push_back(photometric_op(tape, target, wn, alpha_s));
    if (plans_out) plans_out->push_back(std::move(wn.plan));
  }
  const std::vector<double> ones(terms.size(), 1.0);
  return ad::linear_combination(tape, terms, ones);
}

ad::Var depth_fidelity_op(ad::Tape& tape, const SparseDepthMap& sparse, ad::Var depth) {
  const Grid& d = tape.value(depth);
  require_depth_shape(d, sparse.height(), sparse.width(), "depth fidelity");
  const std::size_t n = sparse.valid_count();
  if (n == 0) fail(ErrorCode::kEmptyMask, "depth fidelity needs at least one valid sparse pixel");
  double acc = 0.0;
  const Grid& sd = sparse.grid();
  const auto bits = sparse.mask().bits();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (bits[i]) acc += std::abs(sd[i] - d[i]);
  }
  const double inv = 1.0 / static_cast<double>(n);
  const SparseDepthMap* sp = &sparse;
  return tape.record(Grid::scalar(acc * inv), {depth}, [=](ad::Tape& t, const Grid& g) {
    Grid* dd = t.grad_buffer(depth);
    if (!dd) return;
    const Grid& dv = t.value(depth);
    const Grid& s = sp->grid();
    const auto m = sp->mask().bits();
    for (std::size_t i = 0; i < dv.size(); ++i) {
      if (m[i]) (*dd)[i] += g[0] * inv * sign(dv[i] - s[i]);
    }
  });
}

ad::Var smoothness_op(ad::Tape& tape, const Image& image, ad::Var depth) {
  const Grid& d = tape.value(depth);
  require_depth_shape(d, image.height(), image.width(), "smoothness");
  const int h = image.height(), w = image.width();
  const Grid* wx = &image.edge_weight_x();
  const Grid* wy = &image.edge_weight_y();
  double acc = 0.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (c + 1 < w) acc += (*wx)(r, c) * std::abs(d(r, c + 1) - d(r, c));
      if (r + 1 < h) acc += (*wy)(r, c) * std::abs(d(r + 1, c) - d(r, c));
    }
  }
  const double inv = 1.0 / static_cast<double>(h * w);
  return tape.record(Grid::scalar(acc * inv), {depth}, [=](ad::Tape& t, const Grid& g) {
    Grid* dd = t.grad_buffer(depth);
    if (!dd) return;
    const Grid& dv = t.value(depth);
    const double s = g[0] * inv;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (c + 1 < w) {
          const double e = s * (*wx)(r, c) * sign(dv(r, c + 1) - dv(r, c));
          (*dd)(r, c + 1) += e;
          (*dd)(r, c) -= e;
        }
        if (r + 1 < h) {
          const double e = s * (*wy)(r, c) * sign(dv(r + 1, c) - dv(r, c));
          (*dd)(r + 1, c) += e;
          (*dd)(r, c) -= e;
        }
      }
    }
  });
}

ad::Var flip_depth_op(ad::Tape& tape, ad::Var depth, ad::Var depth_flipped) {
  const Grid& a = tape.value(depth);
  const Grid& b = tape.value(depth_flipped);
  if (!a.same_shape(b) || a.channels() != 1) fail(ErrorCode::kInvalidArgument, "flip consistency: depth shapes differ");
  const int h = a.height(), w = a.width();
  double acc = 0.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) acc += std::abs(a(r, w - 1 - c) - b(r, c));
  }
  const double inv = 1.0 / static_cast<double>(a.size());
  return tape.record(Grid::scalar(acc * inv), {depth, depth_flipped}, [=](ad::Tape& t, const Grid& g) {
    Grid* da = t.grad_buffer(depth);
    Grid* db = t.grad_buffer(depth_flipped);
    const Grid& av = t.value(depth);
    const Grid& bv = t.value(depth_flipped);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double e = g[0] * inv * sign(av(r, w - 1 - c) - bv(r, c));
        if (da) (*da)(r, w - 1 - c) += e;
        if (db) (*db)(r, c) -= e;
      }
    }
  });
}

ad::Var flip_pose_op(ad::Tape& tape, ad::Var pose, ad::Var pose_flipped, double alpha_r, PoseConsistencyMode mode) {
  const Grid& p = tape.value(pose);
  const Grid& q = tape.value(pose_flipped);
  if (p.size() != 6 || q.size() != 6) fail(ErrorCode::kInvalidArgument, "pose consistency needs 6-vectors");
  // Residual i is p[i] + flip_sign[i] * q[i]; it vanishes when q = flip_pose(p).
  static constexpr std::array<double, 6> kFlipSign{1, -1, -1, -1, 1, 1};
  std::array<double, 6> res{};
  for (std::size_t i = 0; i < 6; ++i) res[i] = p[i] + kFlipSign[i] * q[i];
  std::array<double, 6> dres{};  // d value / d residual_i
  double value = 0.0;
  if (mode == PoseConsistencyMode::kComponentWise) {
    for (std::size_t i = 0; i < 6; ++i) {
      const double wgt = i < 3 ? 1.0 : alpha_r;
      value += wgt * std::abs(res[i]);
      dres[i] = wgt * sign(res[i]);
    }
  } else {
    const double st = res[0] + res[1] + res[2];
    const double sr = res[3] + res[4] + res[5];
    value = std::abs(st) + alpha_r * std::abs(sr);
    for (std::size_t i = 0; i < 3; ++i) {
      dres[i] = sign(st);
      dres[i + 3] = alpha_r * sign(sr);
    }
  }
  return tape.record(Grid::scalar(value), {pose, pose_flipped}, [=](ad::Tape& t, const Grid& g) {
    Grid* dp = t.grad_buffer(pose);
    Grid* dq = t.grad_buffer(pose_flipped);
    for (std::size_t i = 0; i < 6; ++i) {
      if (dp) (*dp)[i] += g[0] * dres[i];
      if (dq) (*dq)[i] += g[0] * dres[i] * kFlipSign[i];
    }
  });
}

double view_synthesis_loss(const Image& target, std::span<const Image> sources, const DenseDepthMap& depth,
                           std::span<const Pose6> poses, const Intrinsics& k, double alpha_s) {
  ad::Tape tape;
  const ad::Var d = tape.constant(depth.grid());
  std::vector<ad::Var> pv;
  for (const Pose6& p : poses) pv.push_back(tape.constant(pose_to_grid(p)));
  return tape.scalar(view_synthesis_op(tape, target, sources, d, pv, k, alpha_s));
}

double depth_fidelity_loss(const SparseDepthMap& sparse, const DenseDepthMap& pred) {
  ad::Tape tape;
  return tape.scalar(depth_fidelity_op(tape, sparse, tape.constant(pred.grid())));
}

double smoothness_loss(const Image& image, const DenseDepthMap& depth) {
  ad::Tape tape;
  return tape.scalar(smoothness_op(tape, image, tape.constant(depth.grid())));
}

double flip_consistency_depth(const DenseDepthMap& pred, const DenseDepthMap& pred_flipped) {
  ad::Tape tape;
  return tape.scalar(flip_depth_op(tape, tape.constant(pred.grid()), tape.constant(pred_flipped.grid())));
}

double flip_consistency_pose(const Pose6& p, const Pose6& pf, double alpha_r, PoseConsistencyMode mode) {
  ad::Tape tape;
  return tape.scalar(
      flip_pose_op(tape, tape.constant(pose_to_grid(p)), tape.constant(pose_to_grid(pf)), alpha_r, mode));
}

double vlo_loss(double vs, double df, double ds, const LossWeights& w) { return w.vs * vs + w.df * df + w.ds * ds; }

double adaptive_weight(double l_vs, double lambda_fc, double sigma, bool clamp) {
  if (!(sigma > 0.0)) fail(ErrorCode::kInvalidArgument, "sigma must be positive");
  if (l_vs < 0.0) fail(ErrorCode::kInvalidArgument, "view synthesis loss must be non-negative");
  const double phi = lambda_fc * std::exp(-l_vs / sigma);
  return clamp ? std::min(phi, 1.0) : phi;
}

double combine_total(double vlo, double vlo_flipped, double dfc, double pfc, double phi) {
  return vlo + vlo_flipped + phi * (dfc + pfc);
}

double total_loss(const LossBreakdown& branch, const LossBreakdown& branch_flipped, double dfc, double pfc,
                  const LossWeights& w, bool clamp_phi) {
  const double phi = adaptive_weight(0.5 * (branch.vs + branch_flipped.vs), w.fc, w.sigma, clamp_phi);
  return combine_total(branch.vlo, branch_flipped.vlo, dfc, pfc, phi);
}

}  // namespace vlo
