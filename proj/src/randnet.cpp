#include "nngpcert/randnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "nngpcert/kernel.hpp"
#include "nngpcert/parallel.hpp"
#include "nngpcert/rng.hpp"

namespace nngpcert {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct NetPlan {
  std::vector<std::vector<std::vector<int>>> shift;  // per layer: gather tables
  std::vector<Eigen::MatrixXd> pool_agg;
};

NetPlan make_net_plan(const ArchSpec& arch) {
  NetPlan plan;
  plan.shift.resize(arch.layers.size());
  plan.pool_agg.resize(arch.layers.size());
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const PixelGrid& in_grid = (i == 0) ? arch.input_grid : arch.grids[i - 1];
    if (const auto* in = std::get_if<InputConvLayer>(&arch.layers[i])) {
      plan.shift[i] = shift_tables(in_grid, in->patch, +1);   // reads x_{j, a + beta}
    } else if (const auto* nl = std::get_if<NonlinearLayer>(&arch.layers[i])) {
      plan.shift[i] = shift_tables(in_grid, nl->patch, -1);   // reads tau(phi_{j, a - beta})
    } else if (const auto* pl = std::get_if<PoolLayer>(&arch.layers[i])) {
      PoolPartition part = pool_partition(in_grid, pl->cell);
      Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(part.coarse.size(), in_grid.size());
      for (size_t a = 0; a < part.cells.size(); ++a)
        for (int g : part.cells[a]) agg(static_cast<Eigen::Index>(a), g) = 1.0;
      plan.pool_agg[i] = std::move(agg);
    }
  }
  return plan;
}

// rows (q*ch + j) of the output hold channel j shifted by table q
Eigen::MatrixXd gather(const Eigen::MatrixXd& u, const std::vector<std::vector<int>>& tab) {
  const Eigen::Index ch = u.rows(), pix = u.cols();
  const Eigen::Index np = static_cast<Eigen::Index>(tab.size());
  Eigen::MatrixXd out(ch * np, pix);
  for (Eigen::Index q = 0; q < np; ++q)
    for (Eigen::Index a = 0; a < pix; ++a)
      out.col(a).segment(q * ch, ch) = u.col(tab[q][a]);
  return out;
}

// adjoint of gather: accumulate rows (q*ch + j) back onto shifted pixels
Eigen::MatrixXd scatter(const Eigen::MatrixXd& g, const std::vector<std::vector<int>>& tab,
                        Eigen::Index ch, Eigen::Index pix) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(ch, pix);
  const Eigen::Index np = static_cast<Eigen::Index>(tab.size());
  for (Eigen::Index q = 0; q < np; ++q)
    for (Eigen::Index a = 0; a < pix; ++a)
      out.col(tab[q][a]) += g.col(a).segment(q * ch, ch);
  return out;
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& u) { return u.cwiseMax(0.0); }

Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& u) {
  return (u.array() > 0.0).cast<double>().matrix();
}

double lp_norm(const Eigen::VectorXd& v, double p) {
  if (std::isinf(p)) return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
  if (p == 1.0) return v.cwiseAbs().sum();
  if (p == 2.0) return v.norm();
  return std::pow(v.cwiseAbs().array().pow(p).sum(), 1.0 / p);
}

double dual_exponent(double p) {
  if (p == 1.0) return kInf;
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

}  // namespace

int parameterized_layer_count(const ArchSpec& arch) {
  int count = 0;
  for (const auto& l : arch.layers)
    if (std::holds_alternative<InputConvLayer>(l) || std::holds_alternative<NonlinearLayer>(l) ||
        std::holds_alternative<FlattenLayer>(l))
      ++count;
  return count;
}

RandomNetwork init_random(const ArchSpec& arch, const std::vector<int>& widths, uint64_t seed,
                          uint64_t stream_base) {
  if (static_cast<int>(widths.size()) != parameterized_layer_count(arch))
    throw std::invalid_argument("widths length must equal the number of parameterized layers (" +
                                std::to_string(parameterized_layer_count(arch)) + ")");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("widths must be positive");

  RandomNetwork net;
  net.arch = arch;
  net.widths = widths;
  net.seed = seed;
  net.channels.resize(arch.layers.size());
  net.params.resize(arch.layers.size());

  int pi = 0;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const int in_ch = (i == 0) ? arch.input_channels : net.channels[i - 1];
    const uint64_t stream = stream_base + i;
    // Entries are addressed by their (row, input channel, patch offset)
    // coordinates, so networks of different widths from the same seed share
    // their common subnetwork exactly.
    auto draw = [&](Eigen::MatrixXd& W, Eigen::VectorXd& b, int out_ch, int fan_per_ch,
                    double sigma_w, double sigma_b) {
      const double wstd = sigma_w / std::sqrt(static_cast<double>(in_ch));
      W.resize(out_ch, static_cast<Eigen::Index>(in_ch) * fan_per_ch);
      for (Eigen::Index r = 0; r < W.rows(); ++r)
        for (int q = 0; q < fan_per_ch; ++q)
          for (int j = 0; j < in_ch; ++j) {
            const uint64_t idx = (static_cast<uint64_t>(q) << 44) |
                                 (static_cast<uint64_t>(r) << 22) | static_cast<uint64_t>(j);
            W(r, static_cast<Eigen::Index>(q) * in_ch + j) =
                wstd * indexed_normal(seed, stream, idx);
          }
      b.resize(out_ch);
      for (Eigen::Index r = 0; r < b.size(); ++r)
        b(r) = (sigma_b == 0.0)
                   ? 0.0
                   : sigma_b * indexed_normal(seed, stream, (1ull << 62) | static_cast<uint64_t>(r));
    };

    if (const auto* in = std::get_if<InputConvLayer>(&arch.layers[i])) {
      net.channels[i] = widths[pi];
      draw(net.params[i].W, net.params[i].b, widths[pi], in->patch.size(), in->sigma_w,
           in->sigma_b);
      ++pi;
    } else if (const auto* nl = std::get_if<NonlinearLayer>(&arch.layers[i])) {
      net.channels[i] = widths[pi];
      draw(net.params[i].W, net.params[i].b, widths[pi], nl->patch.size(), nl->sigma_w,
           nl->sigma_b);
      ++pi;
    } else if (const auto* sk = std::get_if<SkipLayer>(&arch.layers[i])) {
      const int target = static_cast<int>(i) - 1 - sk->gap;
      if (net.channels[target] != in_ch)
        throw std::invalid_argument("skip endpoints have different channel counts (" +
                                    std::to_string(net.channels[target]) + " vs " +
                                    std::to_string(in_ch) + ")");
      net.channels[i] = in_ch;
    } else if (std::holds_alternative<PoolLayer>(arch.layers[i])) {
      net.channels[i] = in_ch;
    } else if (const auto* fl = std::get_if<FlattenLayer>(&arch.layers[i])) {
      net.channels[i] = widths[pi];
      const int pix = arch.grids[i - 1].size();
      draw(net.params[i].W, net.params[i].b, widths[pi], pix, fl->sigma_w, fl->sigma_b);
      ++pi;
    } else {
      net.channels[i] = in_ch;  // output
    }
  }
  return net;
}

namespace {

ForwardTrace forward_impl(const RandomNetwork& net, const NetPlan& plan,
                          const Eigen::VectorXd& x) {
  const ArchSpec& arch = net.arch;
  ForwardTrace tr;
  tr.preactivations.resize(arch.layers.size());
  Eigen::MatrixXd img = as_image(arch, x);

  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const Eigen::MatrixXd& prev = (i == 0) ? img : tr.preactivations[i - 1];
    Eigen::MatrixXd& out = tr.preactivations[i];
    if (std::holds_alternative<InputConvLayer>(arch.layers[i])) {
      out = net.params[i].W * gather(prev, plan.shift[i]);
      out.colwise() += net.params[i].b;
    } else if (std::holds_alternative<NonlinearLayer>(arch.layers[i])) {
      out = net.params[i].W * gather(relu(prev), plan.shift[i]);
      out.colwise() += net.params[i].b;
    } else if (const auto* sk = std::get_if<SkipLayer>(&arch.layers[i])) {
      out = prev + tr.preactivations[i - 1 - sk->gap];
    } else if (std::holds_alternative<PoolLayer>(arch.layers[i])) {
      out = prev * plan.pool_agg[i].transpose();
    } else if (std::holds_alternative<FlattenLayer>(arch.layers[i])) {
      const Eigen::MatrixXd act = relu(prev);
      const Eigen::Map<const Eigen::VectorXd> flat(act.data(), act.size());
      out = net.params[i].W * flat + net.params[i].b;
    } else {
      out = prev;  // output layer: component 0 is the network output
    }
  }
  tr.phi = tr.preactivations.back()(0, 0);
  return tr;
}

Eigen::VectorXd backward_impl(const RandomNetwork& net, const NetPlan& plan,
                              const ForwardTrace& tr, const Eigen::VectorXd& x) {
  const ArchSpec& arch = net.arch;
  const size_t L = arch.layers.size();
  std::vector<Eigen::MatrixXd> grads(L);
  for (size_t i = 0; i < L; ++i)
    grads[i] = Eigen::MatrixXd::Zero(tr.preactivations[i].rows(), tr.preactivations[i].cols());
  grads[L - 1](0, 0) = 1.0;  // output selects component 0 of the flatten layer

  Eigen::MatrixXd img = as_image(arch, x);
  Eigen::MatrixXd dinput;

  for (size_t ii = L; ii-- > 0;) {
    const Eigen::MatrixXd& d = grads[ii];
    const Eigen::MatrixXd& prev = (ii == 0) ? img : tr.preactivations[ii - 1];
    if (std::holds_alternative<InputConvLayer>(arch.layers[ii])) {
      const Eigen::MatrixXd dg = net.params[ii].W.transpose() * d;
      dinput = scatter(dg, plan.shift[ii], prev.rows(), prev.cols());
    } else if (std::holds_alternative<NonlinearLayer>(arch.layers[ii])) {
      const Eigen::MatrixXd dg = net.params[ii].W.transpose() * d;
      grads[ii - 1] +=
          scatter(dg, plan.shift[ii], prev.rows(), prev.cols()).cwiseProduct(relu_mask(prev));
    } else if (const auto* sk = std::get_if<SkipLayer>(&arch.layers[ii])) {
      grads[ii - 1] += d;
      grads[ii - 1 - sk->gap] += d;
    } else if (std::holds_alternative<PoolLayer>(arch.layers[ii])) {
      grads[ii - 1] += d * plan.pool_agg[ii];
    } else if (std::holds_alternative<FlattenLayer>(arch.layers[ii])) {
      const Eigen::VectorXd dflat = net.params[ii].W.transpose() * d.col(0);
      const Eigen::Map<const Eigen::MatrixXd> dmat(dflat.data(), prev.rows(), prev.cols());
      grads[ii - 1] += dmat.cwiseProduct(relu_mask(prev));
    } else {
      grads[ii - 1] += d;  // output layer
    }
  }

  const int pix = arch.input_grid.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(arch.input_channels) * pix);
  for (int c = 0; c < arch.input_channels; ++c)
    out.segment(static_cast<Eigen::Index>(c) * pix, pix) = dinput.row(c).transpose();
  return out;
}

}  // namespace

ForwardTrace forward(const RandomNetwork& net, const Eigen::VectorXd& x) {
  return forward_impl(net, make_net_plan(net.arch), x);
}

Eigen::VectorXd gradient(const RandomNetwork& net, const Eigen::VectorXd& x) {
  NetPlan plan = make_net_plan(net.arch);
  ForwardTrace tr = forward_impl(net, plan, x);
  return backward_impl(net, plan, tr, x);
}

std::pair<double, Eigen::VectorXd> value_and_gradient(const RandomNetwork& net,
                                                      const Eigen::VectorXd& x) {
  NetPlan plan = make_net_plan(net.arch);
  ForwardTrace tr = forward_impl(net, plan, x);
  return {tr.phi, backward_impl(net, plan, tr, x)};
}

Eigen::MatrixXd empirical_kernel(const ArchSpec& arch, const std::vector<int>& widths,
                                 const std::vector<Eigen::VectorXd>& points, int draws,
                                 uint64_t seed) {
  if (draws < 100) throw std::invalid_argument("empirical_kernel needs draws >= 100");
  const int m = static_cast<int>(points.size());
  NetPlan plan = make_net_plan(arch);
  const int flatten = arch.flatten_index();
  const auto& fl = std::get<FlattenLayer>(arch.layers[flatten]);

  // Per draw, the read-out layer is integrated out analytically:
  // E[phi(x) phi(y) | hidden layers] = sigma_w^2/ch (u(x).u(y)) + sigma_b^2
  // with u = relu of the flatten input. Same estimand as averaging the
  // scalar products, with the rank-one projection noise removed.
  constexpr int kBlock = 16;
  const int blocks = (draws + kBlock - 1) / kBlock;
  std::vector<Eigen::MatrixXd> partial(blocks);
  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);
    const int lo = static_cast<int>(b) * kBlock;
    const int hi = std::min(draws, lo + kBlock);
    for (int d = lo; d < hi; ++d) {
      RandomNetwork net =
          init_random(arch, widths, seed, static_cast<uint64_t>(d) * 64ull);
      const int ch = net.channels[flatten - 1];
      Eigen::MatrixXd u(static_cast<Eigen::Index>(ch) * arch.grids[flatten - 1].size(), m);
      for (int i = 0; i < m; ++i) {
        ForwardTrace tr = forward_impl(net, plan, points[i]);
        const Eigen::MatrixXd act = relu(tr.preactivations[flatten - 1]);
        u.col(i) = Eigen::Map<const Eigen::VectorXd>(act.data(), act.size());
      }
      const double scale = fl.sigma_w * fl.sigma_w / ch;
      acc.noalias() += scale * (u.transpose() * u);
      acc.array() += fl.sigma_b * fl.sigma_b;
    }
    partial[b] = std::move(acc);
  });

  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(m, m);
  for (int b = 0; b < blocks; ++b) total += partial[b];  // fixed order: deterministic
  return total / draws;
}

// ---- boundary search ----

namespace {

struct SearchState {
  const RandomNetwork& net;
  const NetPlan& plan;
  const Eigen::VectorXd& x0;
  double s0;  // sign of phi(x0)
  int grad_steps = 0;
  int max_grad_steps;

  double phi(const Eigen::VectorXd& x) const { return forward_impl(net, plan, x).phi; }
  bool flipped(double value) const { return s0 * value < 0.0; }
};

// One ascent pass on -s0 * phi constrained to the p-ball of radius R around
// x0 intersected with the unit box. Returns a flipped point if one is hit.
std::optional<Eigen::VectorXd> try_radius(SearchState& st, double p, double R, int inner_steps) {
  const Eigen::VectorXd& x0 = st.x0;
  const Eigen::Index n = x0.size();
  Eigen::VectorXd x = x0;

  for (int it = 0; it < inner_steps; ++it) {
    if (st.grad_steps >= st.max_grad_steps) return std::nullopt;
    ++st.grad_steps;
    ForwardTrace tr = forward_impl(st.net, st.plan, x);
    if (st.flipped(tr.phi)) return x;
    Eigen::VectorXd g = -st.s0 * backward_impl(st.net, st.plan, tr, x);
    const double alpha = (it == 0) ? R : R / 4.0;

    if (std::isinf(p)) {
      for (Eigen::Index i = 0; i < n; ++i)
        x(i) += alpha * (g(i) > 0 ? 1.0 : (g(i) < 0 ? -1.0 : 0.0));
      for (Eigen::Index i = 0; i < n; ++i)
        x(i) = std::clamp(x(i), std::max(0.0, x0(i) - R), std::min(1.0, x0(i) + R));
    } else if (p == 2.0) {
      const double gn = g.norm();
      if (gn <= 0.0) return std::nullopt;
      x += (alpha / gn) * g;
      for (int pass = 0; pass < 2; ++pass) {
        Eigen::VectorXd dx = x - x0;
        const double d = dx.norm();
        if (d > R) x = x0 + (R / d) * dx;
        x = x.cwiseMax(0.0).cwiseMin(1.0);
      }
    } else {  // p == 1: greedy largest-|gradient| coordinate moves from x0
      std::vector<Eigen::Index> order(n);
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      std::sort(order.begin(), order.end(),
                [&](Eigen::Index a, Eigen::Index b) { return std::abs(g(a)) > std::abs(g(b)); });
      x = x0;
      double budget = R;
      for (Eigen::Index idx : order) {
        if (budget <= 0.0 || g(idx) == 0.0) break;
        const double dir = g(idx) > 0 ? 1.0 : -1.0;
        const double slack = dir > 0 ? 1.0 - x0(idx) : x0(idx);
        const double move = std::min(budget, slack);
        x(idx) = x0(idx) + dir * move;
        budget -= move;
      }
    }
  }
  if (st.grad_steps < st.max_grad_steps) {
    ++st.grad_steps;
    const double v = st.phi(x);
    if (st.flipped(v)) return x;
  }
  return std::nullopt;
}

double box_diameter(const Eigen::VectorXd& x0, double p) {
  Eigen::VectorXd reach = x0.cwiseMax(Eigen::VectorXd::Ones(x0.size()) - x0);
  return lp_norm(reach, p);
}

}  // namespace

AttackRecord boundary_search(const RandomNetwork& net, const Eigen::VectorXd& x0, double p,
                             double tolerance, int max_grad_steps) {
  if (p != 1.0 && p != 2.0 && !std::isinf(p))
    throw std::invalid_argument("boundary_search supports p in {1, 2, inf}");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
  if ((x0.array() < 0.0).any() || (x0.array() > 1.0).any())
    throw std::invalid_argument("x0 must lie in [0,1]^n");

  NetPlan plan = make_net_plan(net.arch);
  AttackRecord rec;
  rec.p = p;
  rec.x0 = x0;
  rec.x_star = x0;

  ForwardTrace tr0 = forward_impl(net, plan, x0);
  if (tr0.phi == 0.0) throw std::invalid_argument("phi(x0) = 0: degenerate start");
  SearchState st{net, plan, x0, tr0.phi > 0 ? 1.0 : -1.0, 0, max_grad_steps};

  // first-order estimate of the boundary distance seeds the radius search
  ++st.grad_steps;
  const Eigen::VectorXd g0 = backward_impl(net, plan, tr0, x0);
  const double dual = lp_norm(g0, dual_exponent(p));
  const double r_max = box_diameter(x0, p);
  double R = (dual > 0.0) ? std::min(std::abs(tr0.phi) / dual, r_max) : 0.1 * r_max;
  if (!(R > 0.0)) R = 0.1 * r_max;

  constexpr int kInner = 16;
  std::optional<Eigen::VectorXd> flip;
  double r_hi = R;
  for (int grow = 0; grow < 64 && !flip; ++grow) {
    flip = try_radius(st, p, r_hi, kInner);
    if (flip) break;
    if (r_hi >= r_max || st.grad_steps >= max_grad_steps) break;
    r_hi = std::min(2.0 * r_hi, r_max);
  }
  if (!flip) {
    rec.iterations = st.grad_steps;
    rec.censored = true;
    rec.distance = kInf;
    return rec;
  }

  // shrink the radius as long as smaller balls still contain a flip
  Eigen::VectorXd best = *flip;
  double lo = 0.0, hi = lp_norm(best - x0, p);
  for (int round = 0; round < 14 && st.grad_steps < max_grad_steps; ++round) {
    const double mid = 0.5 * (lo + hi);
    if (auto hit = try_radius(st, p, mid, kInner)) {
      best = *hit;
      hi = lp_norm(best - x0, p);
    } else {
      lo = mid;
    }
    if (hi - lo <= tolerance) break;
  }

  // bisect along the final segment to the crossing
  Eigen::VectorXd delta = best - x0;
  const double gap0 = lp_norm(delta, p);
  double lam_lo = 0.0, lam_hi = 1.0;
  const int max_bisect =
      gap0 > tolerance ? static_cast<int>(std::ceil(std::log2(gap0 / tolerance))) + 2 : 0;
  for (int b = 0; b < max_bisect && (lam_hi - lam_lo) * gap0 > tolerance; ++b) {
    const double mid = 0.5 * (lam_lo + lam_hi);
    if (st.flipped(st.phi(x0 + mid * delta)))
      lam_hi = mid;
    else
      lam_lo = mid;
  }
  rec.x_star = x0 + lam_hi * delta;
  rec.distance = lp_norm(rec.x_star - x0, p);
  rec.iterations = st.grad_steps;
  rec.converged = st.flipped(st.phi(rec.x_star));
  rec.censored = !rec.converged;
  return rec;
}

ScalingResult scaling_experiment(const ScalingConfig& config) {
  if (config.dims.empty()) throw std::invalid_argument("dimension sweep must be nonempty");
  if (config.nets_per_dim < 1 || config.points_per_net < 1)
    throw std::invalid_argument("nets_per_dim and points_per_net must be >= 1");

  ScalingResult result;
  result.config = config;

  struct Job {
    int dim_idx, net_idx;
  };
  std::vector<Job> jobs;
  for (size_t di = 0; di < config.dims.size(); ++di)
    for (int nj = 0; nj < config.nets_per_dim; ++nj)
      jobs.push_back({static_cast<int>(di), nj});

  const size_t per_job = config.points_per_net * config.norms.size();
  std::vector<std::vector<ScalingRecord>> job_records(jobs.size());

  parallel_for(jobs.size(), [&](size_t j) {
    const Job job = jobs[j];
    const int n = config.dims[job.dim_idx];
    ArchSpec arch = fc_arch(n, config.hidden_layers, config.sigma_w, config.sigma_b);
    std::vector<int> widths(parameterized_layer_count(arch), config.width);
    widths.back() = 1;  // scalar read-out
    const uint64_t net_stream = (static_cast<uint64_t>(job.dim_idx) << 32) |
                                static_cast<uint64_t>(job.net_idx);
    RandomNetwork net = init_random(arch, widths, config.seed, net_stream << 8);

    std::vector<ScalingRecord>& out = job_records[j];
    out.reserve(per_job);
    RngStream point_rng(config.seed ^ 0x9e3779b97f4a7c15ull, net_stream);
    for (int pt = 0; pt < config.points_per_net; ++pt) {
      Eigen::VectorXd x0(n);
      for (int i = 0; i < n; ++i) x0(i) = point_rng.uniform();
      for (double p : config.norms) {
        const double tol =
            config.tolerance > 0.0 ? config.tolerance : 1e-5 * box_diameter(x0, p);
        ScalingRecord rec;
        rec.n = n;
        rec.p = p;
        rec.norm2_x0 = x0.norm();
        try {
          AttackRecord att = boundary_search(net, x0, p, tol, config.max_grad_steps);
          rec.censored = att.censored;
          rec.distance = att.distance;
          rec.rel_distance = att.censored ? kInf : att.distance / lp_norm(x0, p);
        } catch (const std::invalid_argument&) {
          rec.censored = true;  // phi(x0) == 0
          rec.distance = kInf;
          rec.rel_distance = kInf;
        }
        out.push_back(rec);
      }
    }
  });

  for (const auto& recs : job_records)
    result.records.insert(result.records.end(), recs.begin(), recs.end());

  auto quantile = [](std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    if (v.empty()) return 0.0;
    const double h = (v.size() - 1) * q;
    const size_t i = static_cast<size_t>(h);
    if (i + 1 >= v.size()) return v.back();
    return v[i] + (h - i) * (v[i + 1] - v[i]);
  };

  for (size_t di = 0; di < config.dims.size(); ++di) {
    for (double p : config.norms) {
      ScalingCell cell;
      cell.n = config.dims[di];
      cell.p = p;
      std::vector<double> dist, rel;
      for (const auto& r : result.records) {
        if (r.n != cell.n || r.p != p) continue;
        ++cell.attacks;
        if (r.censored) {
          ++cell.censored;
          continue;
        }
        dist.push_back(r.distance);
        rel.push_back(r.rel_distance);
      }
      cell.empty = dist.empty();
      if (!cell.empty) {
        cell.median = quantile(dist, 0.5);
        cell.p45 = quantile(dist, 0.45);
        cell.p55 = quantile(dist, 0.55);
        cell.rel_median = quantile(rel, 0.5);
        cell.rel_p45 = quantile(rel, 0.45);
        cell.rel_p55 = quantile(rel, 0.55);
      }
      result.cells.push_back(cell);
    }
  }
  return result;
}

}  // namespace nngpcert
