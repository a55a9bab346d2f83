#include "nngpcert/kernel.hpp"

#include <cmath>
#include <stdexcept>

#include "nngpcert/parallel.hpp"

namespace nngpcert {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

[[noreturn]] void corruption(double t) {
  throw std::runtime_error("correlation " + std::to_string(t) +
                           " exceeds [-1, 1] beyond tolerance; kernel field is corrupted");
}

}  // namespace

double psi(double t, double tol) {
  if (t > 1.0 + tol || t < -1.0 - tol)
    throw std::domain_error("psi argument " + std::to_string(t) + " outside [-1, 1] + tol");
  t = std::min(1.0, std::max(-1.0, t));
  return (std::sqrt(std::max(0.0, 1.0 - t * t)) + (kPi - std::acos(t)) * t) / kPi;
}

Eigen::MatrixXd as_image(const ArchSpec& arch, const Eigen::VectorXd& x) {
  const int pix = arch.input_grid.size();
  if (x.size() != static_cast<Eigen::Index>(arch.input_channels) * pix)
    throw std::invalid_argument("input has dimension " + std::to_string(x.size()) +
                                ", architecture expects " +
                                std::to_string(arch.input_channels * pix));
  Eigen::MatrixXd img(arch.input_channels, pix);
  for (int c = 0; c < arch.input_channels; ++c)
    img.row(c) = x.segment(static_cast<Eigen::Index>(c) * pix, pix).transpose();
  return img;
}

namespace {

// Precomputed per-layer index machinery for one architecture.
struct LayerPlan {
  std::vector<std::vector<int>> plus;  // shift tables on the layer's input grid
  Eigen::MatrixXd pool_agg;            // coarse x fine 0/1 aggregation
};

struct ArchPlan {
  const ArchSpec* arch;
  std::vector<LayerPlan> layers;
};

ArchPlan make_plan(const ArchSpec& arch) {
  ArchPlan plan{&arch, std::vector<LayerPlan>(arch.layers.size())};
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const PixelGrid& in_grid = (i == 0) ? arch.input_grid : arch.grids[i - 1];
    if (const auto* in = std::get_if<InputConvLayer>(&arch.layers[i])) {
      plan.layers[i].plus = shift_tables(in_grid, in->patch, +1);
    } else if (const auto* nl = std::get_if<NonlinearLayer>(&arch.layers[i])) {
      plan.layers[i].plus = shift_tables(in_grid, nl->patch, +1);
    } else if (const auto* pl = std::get_if<PoolLayer>(&arch.layers[i])) {
      PoolPartition part = pool_partition(in_grid, pl->cell);
      Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(part.coarse.size(), in_grid.size());
      for (size_t a = 0; a < part.cells.size(); ++a)
        for (int g : part.cells[a]) agg(static_cast<Eigen::Index>(a), g) = 1.0;
      plan.layers[i].pool_agg = std::move(agg);
    }
  }
  return plan;
}

// Patched copy of an image: row (j, q) holds channel j shifted by offset q.
Eigen::MatrixXd gather_patch(const Eigen::MatrixXd& img, const std::vector<std::vector<int>>& tab) {
  const Eigen::Index ch = img.rows(), pix = img.cols();
  const Eigen::Index np = static_cast<Eigen::Index>(tab.size());
  Eigen::MatrixXd out(ch * np, pix);
  for (Eigen::Index q = 0; q < np; ++q)
    for (Eigen::Index a = 0; a < pix; ++a)
      out.col(a).segment(q * ch, ch) = img.col(tab[q][a]);
  return out;
}

void check_diag(const Eigen::VectorXd& d) {
  const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
  if (d.minCoeff() < -kCorrelationTol * scale)
    throw std::runtime_error("negative variance on the kernel field diagonal: " +
                             std::to_string(d.minCoeff()));
}

// V_{a,b} = sqrt(dx_a dy_b) Psi(K_{a,b} / sqrt(dx_a dy_b)); zero-variance
// entries contribute 0 (the continuous limit).
Eigen::MatrixXd relu_v(const Eigen::MatrixXd& cross, const Eigen::VectorXd& dx,
                       const Eigen::VectorXd& dy) {
  Eigen::MatrixXd v(cross.rows(), cross.cols());
  for (Eigen::Index a = 0; a < cross.rows(); ++a) {
    for (Eigen::Index b = 0; b < cross.cols(); ++b) {
      const double s = dx(a) * dy(b);
      if (s <= 0.0) {
        v(a, b) = 0.0;
        continue;
      }
      const double denom = std::sqrt(s);
      const double t = cross(a, b) / denom;
      if (t > 1.0 + kCorrelationTol || t < -1.0 - kCorrelationTol) corruption(t);
      v(a, b) = denom * psi(t);
    }
  }
  return v;
}

// sum_q V[plus_q(a), plus_q(b)]
Eigen::MatrixXd patch_sum(const Eigen::MatrixXd& v, const std::vector<std::vector<int>>& plus) {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(v.rows(), v.cols());
  for (const auto& tab : plus)
    for (Eigen::Index a = 0; a < v.rows(); ++a) {
      const int ra = tab[a];
      for (Eigen::Index b = 0; b < v.cols(); ++b) acc(a, b) += v(ra, tab[b]);
    }
  return acc;
}

Eigen::MatrixXd input_cross(const ArchPlan& plan, const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& y) {
  const auto& in = std::get<InputConvLayer>(plan.arch->layers[0]);
  const auto& tab = plan.layers[0].plus;
  Eigen::MatrixXd xp = gather_patch(x, tab);
  Eigen::MatrixXd yp = gather_patch(y, tab);
  const double scale = in.sigma_w * in.sigma_w / plan.arch->input_channels;
  return Eigen::MatrixXd::Constant(x.cols(), x.cols(), in.sigma_b * in.sigma_b) +
         scale * (xp.transpose() * yp);
}

// Cross-field propagation K^{(l)}_{a,b}(x,y) for one ordered pair, given the
// per-layer variance diagonals of both points. With dx == dy == the evolving
// field's own diagonal this computes a self field and can record diagonals.
double propagate_pair(const ArchPlan& plan, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                      const std::vector<Eigen::VectorXd>* dx, const std::vector<Eigen::VectorXd>* dy,
                      std::vector<Eigen::VectorXd>* diag_out) {
  const ArchSpec& arch = *plan.arch;
  const bool self = (dx == nullptr);
  std::vector<Eigen::MatrixXd> fields(arch.layers.size());
  fields[0] = input_cross(plan, x, y);
  if (self) check_diag(fields[0].diagonal());
  if (diag_out) diag_out->push_back(fields[0].diagonal());

  double out = 0.0;
  for (size_t i = 1; i < arch.layers.size(); ++i) {
    const Eigen::MatrixXd& prev = fields[i - 1];
    const Eigen::VectorXd da = self ? Eigen::VectorXd(prev.diagonal()) : (*dx)[i - 1];
    const Eigen::VectorXd db = self ? da : (*dy)[i - 1];

    if (const auto* nl = std::get_if<NonlinearLayer>(&arch.layers[i])) {
      Eigen::MatrixXd v = relu_v(prev, da, db);
      fields[i] = Eigen::MatrixXd::Constant(prev.rows(), prev.cols(), nl->sigma_b * nl->sigma_b) +
                  (nl->sigma_w * nl->sigma_w / 2.0) * patch_sum(v, plan.layers[i].plus);
    } else if (const auto* sk = std::get_if<SkipLayer>(&arch.layers[i])) {
      fields[i] = prev + fields[i - 1 - sk->gap];
    } else if (std::holds_alternative<PoolLayer>(arch.layers[i])) {
      const Eigen::MatrixXd& agg = plan.layers[i].pool_agg;
      fields[i] = agg * prev * agg.transpose();
    } else if (const auto* fl = std::get_if<FlattenLayer>(&arch.layers[i])) {
      double acc = 0.0;
      for (Eigen::Index a = 0; a < prev.rows(); ++a) {
        const double s = da(a) * db(a);
        if (s <= 0.0) continue;
        const double denom = std::sqrt(s);
        const double t = prev(a, a) / denom;
        if (t > 1.0 + kCorrelationTol || t < -1.0 - kCorrelationTol) corruption(t);
        acc += denom * psi(t);
      }
      out = fl->sigma_b * fl->sigma_b + (fl->sigma_w * fl->sigma_w / 2.0) * acc;
      fields[i] = Eigen::MatrixXd::Constant(1, 1, out);
    } else if (std::holds_alternative<OutputLayer>(arch.layers[i])) {
      fields[i] = prev;
      out = prev(0, 0);
    } else {
      throw std::logic_error("input_conv appeared past layer 0");
    }
    if (self && fields[i].size() > 1) check_diag(fields[i].diagonal());
    if (diag_out) diag_out->push_back(fields[i].diagonal());
  }
  return out;
}

struct SelfTrace {
  std::vector<Eigen::VectorXd> diag;
  double out = 0.0;
};

SelfTrace self_trace(const ArchPlan& plan, const Eigen::MatrixXd& x) {
  SelfTrace t;
  t.out = propagate_pair(plan, x, x, nullptr, nullptr, &t.diag);
  return t;
}

}  // namespace

KernelField input_field(const ArchSpec& arch, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  ArchPlan plan = make_plan(arch);
  KernelField f;
  f.layer = 0;
  f.xx = input_cross(plan, x, x);
  f.xy = input_cross(plan, x, y);
  f.yy = input_cross(plan, y, y);
  check_diag(f.xx.diagonal());
  check_diag(f.yy.diagonal());
  return f;
}

KernelField propagate_layer(const ArchSpec& arch, const KernelField& field, int next,
                            const std::vector<KernelField>& earlier) {
  if (next != field.layer + 1)
    throw std::invalid_argument("propagate_layer expects the next layer index");
  const PixelGrid& in_grid = arch.grids[field.layer];
  if (field.xy.rows() != in_grid.size() || field.xy.cols() != in_grid.size())
    throw std::invalid_argument("kernel field shape does not match the layer's input grid");

  ArchPlan plan = make_plan(arch);
  KernelField out;
  out.layer = next;
  const Eigen::VectorXd dx = field.xx.diagonal();
  const Eigen::VectorXd dy = field.yy.diagonal();
  check_diag(dx);
  check_diag(dy);

  if (const auto* nl = std::get_if<NonlinearLayer>(&arch.layers[next])) {
    const double sb2 = nl->sigma_b * nl->sigma_b;
    const double c = nl->sigma_w * nl->sigma_w / 2.0;
    const auto& plus = plan.layers[next].plus;
    auto lift = [&](const Eigen::MatrixXd& k, const Eigen::VectorXd& da,
                    const Eigen::VectorXd& db) {
      return Eigen::MatrixXd(Eigen::MatrixXd::Constant(k.rows(), k.cols(), sb2) +
                             c * patch_sum(relu_v(k, da, db), plus));
    };
    out.xx = lift(field.xx, dx, dx);
    out.xy = lift(field.xy, dx, dy);
    out.yy = lift(field.yy, dy, dy);
  } else if (const auto* sk = std::get_if<SkipLayer>(&arch.layers[next])) {
    const int target = next - 1 - sk->gap;
    if (target < 0 || target >= static_cast<int>(earlier.size()) ||
        earlier[target].layer != target)
      throw std::invalid_argument("skip needs the stored field of its target layer");
    out.xx = field.xx + earlier[target].xx;
    out.xy = field.xy + earlier[target].xy;
    out.yy = field.yy + earlier[target].yy;
  } else if (std::holds_alternative<PoolLayer>(arch.layers[next])) {
    const Eigen::MatrixXd& agg = plan.layers[next].pool_agg;
    out.xx = agg * field.xx * agg.transpose();
    out.xy = agg * field.xy * agg.transpose();
    out.yy = agg * field.yy * agg.transpose();
  } else if (const auto* fl = std::get_if<FlattenLayer>(&arch.layers[next])) {
    auto contract = [&](const Eigen::MatrixXd& k, const Eigen::VectorXd& da,
                        const Eigen::VectorXd& db) {
      double acc = 0.0;
      for (Eigen::Index a = 0; a < k.rows(); ++a) {
        const double s = da(a) * db(a);
        if (s <= 0.0) continue;
        const double denom = std::sqrt(s);
        acc += denom * psi(k(a, a) / denom);
      }
      return fl->sigma_b * fl->sigma_b + (fl->sigma_w * fl->sigma_w / 2.0) * acc;
    };
    out.xx = Eigen::MatrixXd::Constant(1, 1, contract(field.xx, dx, dx));
    out.xy = Eigen::MatrixXd::Constant(1, 1, contract(field.xy, dx, dy));
    out.yy = Eigen::MatrixXd::Constant(1, 1, contract(field.yy, dy, dy));
  } else if (std::holds_alternative<OutputLayer>(arch.layers[next])) {
    out.xx = field.xx;
    out.xy = field.xy;
    out.yy = field.yy;
  } else {
    throw std::invalid_argument("input_conv cannot appear past layer 0");
  }
  check_diag(out.xx.diagonal());
  check_diag(out.yy.diagonal());
  return out;
}

std::vector<KernelField> propagate_all(const ArchSpec& arch, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& y) {
  Eigen::MatrixXd xi = as_image(arch, x), yi = as_image(arch, y);
  std::vector<KernelField> fields;
  fields.reserve(arch.layers.size());
  fields.push_back(input_field(arch, xi, yi));
  for (size_t i = 1; i < arch.layers.size(); ++i)
    fields.push_back(propagate_layer(arch, fields.back(), static_cast<int>(i), fields));
  return fields;
}

PairKernel output_kernel(const ArchSpec& arch, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y) {
  ArchPlan plan = make_plan(arch);
  Eigen::MatrixXd xi = as_image(arch, x), yi = as_image(arch, y);
  SelfTrace sx = self_trace(plan, xi);
  SelfTrace sy = self_trace(plan, yi);
  const double kxy = propagate_pair(plan, xi, yi, &sx.diag, &sy.diag, nullptr);
  return {sx.out, kxy, sy.out};
}

Eigen::MatrixXd kernel_matrix(const ArchSpec& arch, const std::vector<Eigen::VectorXd>& points) {
  const size_t m = points.size();
  ArchPlan plan = make_plan(arch);
  std::vector<Eigen::MatrixXd> images(m);
  for (size_t i = 0; i < m; ++i) images[i] = as_image(arch, points[i]);

  std::vector<SelfTrace> traces(m);
  parallel_for(m, [&](size_t i) { traces[i] = self_trace(plan, images[i]); });

  Eigen::MatrixXd gram(m, m);
  for (size_t i = 0; i < m; ++i) gram(i, i) = traces[i].out;

  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(m * (m - 1) / 2);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = i + 1; j < m; ++j) pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
  parallel_for(pairs.size(), [&](size_t p) {
    const auto [i, j] = pairs[p];
    const double k =
        propagate_pair(plan, images[i], images[j], &traces[i].diag, &traces[j].diag, nullptr);
    gram(i, j) = k;
    gram(j, i) = k;
  });
  return gram;
}

double rkhs_distance(double kxx, double kxy, double kyy) {
  const double rad = kxx - 2.0 * kxy + kyy;
  if (rad >= 0.0) return std::sqrt(rad);
  const double scale = std::max(1.0, std::abs(kxx) + std::abs(kyy));
  if (rad < -1e-9 * scale)
    throw std::runtime_error("RKHS distance radicand " + std::to_string(rad) +
                             " is negative beyond tolerance");
  return 0.0;
}

SmoothnessConstants smoothness_constants(const ArchSpec& arch) {
  SmoothnessConstants sc;
  const double i0 = arch.input_grid.size();
  double c = 0.0;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    if (const auto* in = std::get_if<InputConvLayer>(&arch.layers[i])) {
      c = in->sigma_w * std::sqrt(static_cast<double>(in->patch.size()) / arch.input_channels);
    } else if (const auto* nl = std::get_if<NonlinearLayer>(&arch.layers[i])) {
      c *= nl->sigma_w * std::sqrt(nl->patch.size() / 2.0);
    } else if (const auto* sk = std::get_if<SkipLayer>(&arch.layers[i])) {
      const double ct = sc.C_layer[i - 1 - sk->gap];
      c = std::sqrt(c * c + ct * ct);
    } else if (const auto* fl = std::get_if<FlattenLayer>(&arch.layers[i])) {
      // The dense read-out averages the grid; the norm lower bound carries
      // only the 1/2 ReLU factor, not a patch-size factor.
      c *= fl->sigma_w * std::sqrt(0.5);
    }
    // pool and output leave C unchanged
    sc.C_layer.push_back(c);
    const double il = std::holds_alternative<FlattenLayer>(arch.layers[i]) ||
                              std::holds_alternative<OutputLayer>(arch.layers[i])
                          ? arch.grid_before_flatten().size()
                          : arch.grids[i].size();
    sc.M_layer.push_back(std::sqrt(i0 / il));
  }
  sc.C = sc.C_layer.back();
  sc.M = std::sqrt(i0 / arch.grid_before_flatten().size());
  return sc;
}

std::vector<LayerTrace> layer_traces(const ArchSpec& arch, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& y) {
  std::vector<KernelField> fields = propagate_all(arch, x, y);
  std::vector<LayerTrace> out;
  out.reserve(fields.size());
  for (const auto& f : fields)
    out.push_back({f.layer, f.xx.trace(), f.xy.trace(), f.yy.trace()});
  return out;
}

}  // namespace nngpcert
