#include "carbsim/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include "carbsim/constitutive.hpp"

namespace carbsim {

namespace cst = constitutive;

std::string_view to_string(Unknown u) {
  switch (u) {
    case Unknown::saturation: return "saturation";
    case Unknown::co2: return "co2";
    case Unknown::caoh2: return "caoh2";
  }
  return "?";
}

Unknown unknown_from_string(std::string_view text) {
  if (text == "saturation" || text == "S") return Unknown::saturation;
  if (text == "co2" || text == "c_co2") return Unknown::co2;
  if (text == "caoh2" || text == "c_caoh2") return Unknown::caoh2;
  throw std::invalid_argument("unknown field '" + std::string(text) + "'");
}

double BoundaryValue::at(double t) const {
  if (kind == Kind::constant) return value;
  return value + amplitude * std::sin(2.0 * std::numbers::pi * t / period + phase);
}

void TimeStepPlan::validate() const {
  auto fail = [](const char* m) { throw std::invalid_argument(std::string("time plan: ") + m); };
  if (!(t_end >= 0.0)) fail("t_end must be >= 0");
  if (!(dt_init > 0.0)) fail("dt_init must be > 0");
  if (!(dt_min > 0.0) || dt_min > dt_init) fail("dt_min must lie in (0, dt_init]");
  if (!(dt_max >= dt_init)) fail("dt_max must be >= dt_init");
  if (!(newton_tol > 0.0)) fail("newton_tol must be > 0");
  if (newton_max_iter < 1) fail("newton_max_iter must be >= 1");
  if (!(growth >= 1.0)) fail("growth must be >= 1");
  if (!(shrink > 0.0 && shrink < 1.0)) fail("shrink must lie in (0, 1)");
  if (!(max_saturation_change > 0.0)) fail("max_saturation_change must be > 0");
}

struct TransportSolver::StepContext {
  double dt = 1.0;
  double t_new = 0.0;
  double a0 = 1.0;  // BDF weight of the new level
  Eigen::VectorXd hist_w, hist_c, hist_ch;
  Eigen::VectorXd fixed_c, fixed_ch;  // used when carbonation is off
};

namespace {

constexpr double kSmin = cst::kSaturationFloor;
constexpr double kSmax = 1.0 - cst::kSaturationFloor;

struct Porosity {
  double value;
  double d_dch;
};

Porosity porosity_at(double ch, double theta0, const MaterialParams& p) {
  const double c0 = p.c_CaOH2_0;
  const double varphi = cst::carbonation_front(ch, c0);
  Porosity r{cst::porosity_from_front(varphi, theta0, p.theta_c), 0.0};
  if (ch >= 0.0 && ch <= c0) r.d_dch = (theta0 - p.theta_c) / c0;
  return r;
}

}  // namespace

TransportSolver::TransportSolver(std::shared_ptr<const Mesh> mesh, MaterialParams params, Eigen::VectorXd theta_0,
                                 std::vector<CrackField> cracks, std::vector<BoundaryCondition> bcs,
                                 SolverOptions options)
    : mesh_(std::move(mesh)),
      params_(params),
      theta_0_(std::move(theta_0)),
      cracks_(std::move(cracks)),
      bcs_(std::move(bcs)),
      options_(options) {
  if (!mesh_) throw std::invalid_argument("solver: no mesh");
  params_.validate();
  const auto n = static_cast<Eigen::Index>(mesh_->num_nodes());
  if (theta_0_.size() != n) throw std::invalid_argument("solver: porosity field size does not match the mesh");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(theta_0_[i] > 0.0 && theta_0_[i] < 1.0)) throw std::invalid_argument("solver: porosity outside (0, 1)");
  for (const auto& c : cracks_)
    if (c.phi.size() != n) throw std::invalid_argument("solver: phase field size does not match the mesh");
  for (const auto& bc : bcs_)
    if (!mesh_->has_marker(bc.marker)) throw std::invalid_argument("solver: unknown boundary marker '" + bc.marker + "'");

  nf_ = options_.carbonation ? 3 : 1;
  volumes_ = lumped_mass(*mesh_);
  crack_data_ = crack_quadrature_data(*mesh_, cracks_, options_.flux_quadrature);

  element_mass_.resize(mesh_->num_elements());
  for (std::size_t e = 0; e < mesh_->num_elements(); ++e) {
    auto& M = element_mass_[e];
    for (auto& row : M) row.fill(0.0);
    for (const auto& qp : mesh_->quadrature(e))
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) M[a][b] += qp.weight * qp.N[a] * qp.N[b];
    if (options_.lumped_storage) {
      for (int a = 0; a < 4; ++a) {
        double sum = 0.0;
        for (int b = 0; b < 4; ++b) sum += M[a][b];
        M[a].fill(0.0);
        M[a][a] = sum;
      }
    }
  }

  co2_scale_ = 0.0;
  for (const auto& bc : bcs_)
    if (bc.unknown == Unknown::co2)
      co2_scale_ = std::max(co2_scale_, std::abs(bc.value.value) + std::abs(bc.value.amplitude));
  if (!(co2_scale_ > 0.0)) co2_scale_ = 1.0;

  build_pattern();
  build_dirichlet();
}

int TransportSolver::find_slot(int row, int col) const {
  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  const int* lo = inner + outer[col];
  const int* hi = inner + outer[col + 1];
  const int* it = std::lower_bound(lo, hi, row);
  if (it == hi || *it != row) throw std::logic_error("solver: entry outside the sparsity pattern");
  return static_cast<int>(it - inner);
}

void TransportSolver::build_pattern() {
  const auto n_dof = static_cast<Eigen::Index>(mesh_->num_nodes()) * nf_;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh_->num_elements() * 16 * nf_ * nf_);
  for (const auto& el : mesh_->elements())
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int fa = 0; fa < nf_; ++fa)
          for (int fb = 0; fb < nf_; ++fb) trips.emplace_back(el[a] * nf_ + fa, el[b] * nf_ + fb, 0.0);
  pattern_.resize(n_dof, n_dof);
  pattern_.setFromTriplets(trips.begin(), trips.end());
  pattern_.makeCompressed();

  const int le = 4 * nf_;
  element_slots_.assign(mesh_->num_elements(), std::vector<int>(static_cast<std::size_t>(le * le)));
  for (std::size_t e = 0; e < mesh_->num_elements(); ++e) {
    const auto& el = mesh_->element(e);
    for (int a = 0; a < 4; ++a)
      for (int fa = 0; fa < nf_; ++fa)
        for (int b = 0; b < 4; ++b)
          for (int fb = 0; fb < nf_; ++fb)
            element_slots_[e][static_cast<std::size_t>((a * nf_ + fa) * le + b * nf_ + fb)] =
                find_slot(el[a] * nf_ + fa, el[b] * nf_ + fb);
  }
  node_slots_.assign(mesh_->num_nodes(), std::vector<int>(static_cast<std::size_t>(nf_ * nf_)));
  for (std::size_t i = 0; i < mesh_->num_nodes(); ++i)
    for (int fa = 0; fa < nf_; ++fa)
      for (int fb = 0; fb < nf_; ++fb)
        node_slots_[i][static_cast<std::size_t>(fa * nf_ + fb)] =
            find_slot(static_cast<int>(i) * nf_ + fa, static_cast<int>(i) * nf_ + fb);
}

void TransportSolver::build_dirichlet() {
  const std::size_t n_dof = mesh_->num_nodes() * static_cast<std::size_t>(nf_);
  std::vector<int> owner(n_dof, -1);
  for (std::size_t k = 0; k < bcs_.size(); ++k) {
    const int field = static_cast<int>(bcs_[k].unknown);
    if (field >= nf_) continue;  // inert without carbonation
    for (int node : mesh_->marker_nodes(bcs_[k].marker))
      owner[static_cast<std::size_t>(node * nf_ + field)] = static_cast<int>(k);
  }
  dirichlet_.clear();
  is_dirichlet_.assign(n_dof, 0);
  std::vector<int> row_index(n_dof, -1);
  for (std::size_t d = 0; d < n_dof; ++d) {
    if (owner[d] < 0) continue;
    row_index[d] = static_cast<int>(dirichlet_.size());
    dirichlet_.emplace_back(static_cast<int>(d), owner[d]);
    is_dirichlet_[d] = 1;
  }
  row_entries_.assign(dirichlet_.size(), {});
  for (Eigen::Index col = 0; col < pattern_.outerSize(); ++col)
    for (int k = pattern_.outerIndexPtr()[col]; k < pattern_.outerIndexPtr()[col + 1]; ++k) {
      const int r = row_index[static_cast<std::size_t>(pattern_.innerIndexPtr()[k])];
      if (r >= 0) row_entries_[static_cast<std::size_t>(r)].push_back(k);
    }
}

Eigen::VectorXd TransportSolver::porosity(const FieldState& state) const {
  Eigen::VectorXd th(theta_0_.size());
  for (Eigen::Index i = 0; i < th.size(); ++i) th[i] = porosity_at(state.c_ch[i], theta_0_[i], params_).value;
  return th;
}

double TransportSolver::water_content(const FieldState& state) const {
  return volumes_.dot(porosity(state).cwiseProduct(state.S));
}

void TransportSolver::apply_dirichlet(FieldState& state, double t) const {
  for (const auto& [dof, k] : dirichlet_) {
    const int node = dof / nf_;
    const double v = bcs_[static_cast<std::size_t>(k)].value.at(t);
    switch (bcs_[static_cast<std::size_t>(k)].unknown) {
      case Unknown::saturation: state.S[node] = std::clamp(v, kSmin, kSmax); break;
      case Unknown::co2: state.c_co2[node] = std::max(v, 0.0); break;
      case Unknown::caoh2: state.c_ch[node] = std::clamp(v, 0.0, params_.c_CaOH2_0); break;
    }
  }
}

Eigen::VectorXd TransportSolver::pack(const FieldState& s) const {
  const auto n = static_cast<Eigen::Index>(mesh_->num_nodes());
  Eigen::VectorXd u(n * nf_);
  for (Eigen::Index i = 0; i < n; ++i) {
    u[i * nf_] = s.S[i];
    if (nf_ == 3) {
      u[i * 3 + 1] = s.c_co2[i];
      u[i * 3 + 2] = s.c_ch[i];
    }
  }
  return u;
}

void TransportSolver::unpack(const Eigen::VectorXd& u, FieldState& s) const {
  const auto n = static_cast<Eigen::Index>(mesh_->num_nodes());
  for (Eigen::Index i = 0; i < n; ++i) {
    s.S[i] = u[i * nf_];
    if (nf_ == 3) {
      s.c_co2[i] = u[i * 3 + 1];
      s.c_ch[i] = u[i * 3 + 2];
    }
  }
}

Eigen::VectorXd TransportSolver::unknown_scale() const {
  const auto n = static_cast<Eigen::Index>(mesh_->num_nodes());
  Eigen::VectorXd sc(n * nf_);
  for (Eigen::Index i = 0; i < n; ++i) {
    sc[i * nf_] = 1.0;
    if (nf_ == 3) {
      sc[i * 3 + 1] = co2_scale_;
      sc[i * 3 + 2] = params_.c_CaOH2_0;
    }
  }
  return sc;
}

double TransportSolver::project(Eigen::VectorXd& u) const {
  double clamp = 0.0;
  const auto n = static_cast<Eigen::Index>(mesh_->num_nodes());
  for (Eigen::Index i = 0; i < n; ++i) {
    double& s = u[i * nf_];
    const double sc = std::clamp(s, kSmin, kSmax);
    clamp = std::max(clamp, std::abs(sc - s));
    s = sc;
    if (nf_ == 3) {
      double& c = u[i * 3 + 1];
      if (c < 0.0) {
        clamp = std::max(clamp, -c / co2_scale_);
        c = 0.0;
      }
      double& ch = u[i * 3 + 2];
      const double chc = std::clamp(ch, 0.0, params_.c_CaOH2_0);
      clamp = std::max(clamp, std::abs(chc - ch) / params_.c_CaOH2_0);
      ch = chc;
    }
  }
  return clamp;
}

TransportSolver::StepContext TransportSolver::make_context(const FieldState& old, const FieldState* older, double dt,
                                                           double t_new) const {
  StepContext ctx;
  ctx.dt = dt;
  ctx.t_new = t_new;
  const Eigen::VectorXd th = porosity(old);
  Eigen::VectorXd mw = th.cwiseProduct(old.S);
  Eigen::VectorXd mc = th.cwiseProduct((1.0 - old.S.array()).matrix()).cwiseProduct(old.c_co2);
  Eigen::VectorXd mch = old.c_ch;
  if (older != nullptr) {
    const double w = dt / (old.t - older->t);
    const double a0 = (1.0 + 2.0 * w) / (1.0 + w);
    const double a1 = -(1.0 + w);
    const double a2 = w * w / (1.0 + w);
    const Eigen::VectorXd th2 = porosity(*older);
    const Eigen::VectorXd mw2 = th2.cwiseProduct(older->S);
    const Eigen::VectorXd mc2 = th2.cwiseProduct((1.0 - older->S.array()).matrix()).cwiseProduct(older->c_co2);
    ctx.a0 = a0;
    ctx.hist_w = -(a1 * mw + a2 * mw2);
    ctx.hist_c = -(a1 * mc + a2 * mc2);
    ctx.hist_ch = -(a1 * mch + a2 * older->c_ch);
  } else {
    ctx.hist_w = mw;
    ctx.hist_c = mc;
    ctx.hist_ch = mch;
  }
  ctx.fixed_c = old.c_co2;
  ctx.fixed_ch = old.c_ch;
  return ctx;
}

void TransportSolver::assemble(const Eigen::VectorXd& u, const StepContext& ctx, Eigen::VectorXd& R,
                               Eigen::SparseMatrix<double>* J) const {
  const Mesh& mesh = *mesh_;
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  const int nf = nf_;
  const bool carb = nf == 3;
  const double dt = ctx.dt;
  const double a0 = ctx.a0;
  const double kr = params_.reaction_coefficient();

  R.setZero(n * nf);
  double* jv = nullptr;
  if (J) {
    *J = pattern_;
    J->coeffs().setZero();
    jv = J->valuePtr();
  }

  // nodal primary values and porosity
  Eigen::VectorXd S(n), c(n), ch(n), th(n), dth(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    S[i] = u[i * nf];
    c[i] = carb ? u[i * nf + 1] : ctx.fixed_c[i];
    ch[i] = carb ? u[i * nf + 2] : ctx.fixed_ch[i];
    const auto p = porosity_at(ch[i], theta_0_[i], params_);
    th[i] = p.value;
    dth[i] = carb ? p.d_dch : 0.0;
  }

  const int le = 4 * nf;
  constexpr int W = 0, C = 1, H = 2;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& el = mesh.element(e);
    const int* slots = element_slots_[e].data();
    auto add = [&](int a, int fa, int b, int fb, double v) {
      jv[slots[(a * nf + fa) * le + b * nf + fb]] += v;
    };
    const auto& M = element_mass_[e];

    // storage
    for (int a = 0; a < 4; ++a) {
      const int ia = el[a];
      for (int b = 0; b < 4; ++b) {
        const double m = M[a][b];
        if (m == 0.0) continue;
        const int ib = el[b];
        R[ia * nf + W] += m * (a0 * th[ib] * S[ib] - ctx.hist_w[ib]) / dt;
        if (jv) {
          add(a, W, b, W, m * a0 * th[ib] / dt);
          if (carb) add(a, W, b, H, m * a0 * S[ib] * dth[ib] / dt);
        }
        if (carb) {
          const double wet = 1.0 - S[ib];
          R[ia * nf + C] += m * (a0 * th[ib] * wet * c[ib] - ctx.hist_c[ib]) / dt;
          if (jv) {
            add(a, C, b, W, -m * a0 * th[ib] * c[ib] / dt);
            add(a, C, b, C, m * a0 * th[ib] * wet / dt);
            add(a, C, b, H, m * a0 * dth[ib] * wet * c[ib] / dt);
          }
        }
      }
      if (carb) {
        // lumped reaction sink
        double v = 0.0;
        for (int b = 0; b < 4; ++b) v += M[a][b];
        const double rn = cst::neutralization_rate(c[ia], ch[ia], params_);
        R[ia * nf + C] += v * th[ia] * S[ia] * rn;
        if (jv) {
          add(a, C, a, W, v * th[ia] * rn);
          add(a, C, a, C, v * th[ia] * S[ia] * kr * ch[ia]);
          add(a, C, a, H, v * kr * c[ia] * (dth[ia] * S[ia] * ch[ia] + th[ia] * S[ia]));
        }
      }
    }

    // fluxes
    const auto& quad = mesh.quadrature(e, options_.flux_quadrature);
    for (std::size_t q = 0; q < 4; ++q) {
      const auto& qp = quad[q];
      double Sq = 0.0, thq = 0.0, cq = 0.0;
      Eigen::Vector2d gS = Eigen::Vector2d::Zero(), gc = Eigen::Vector2d::Zero();
      std::array<Eigen::Vector2d, 4> dN;
      for (int a = 0; a < 4; ++a) {
        dN[a] = Eigen::Vector2d(qp.dN[a][0], qp.dN[a][1]);
        Sq += qp.N[a] * S[el[a]];
        thq += qp.N[a] * th[el[a]];
        gS += dN[a] * S[el[a]];
        if (carb) {
          cq += qp.N[a] * c[el[a]];
          gc += dN[a] * c[el[a]];
        }
      }
      (void)cq;
      const double w = qp.weight;
      const auto mob = cst::water_mobility(Sq, params_);
      const double km = cst::bulk_permeability(thq, params_);
      Eigen::Matrix2d K = km * Eigen::Matrix2d::Identity();
      if (!crack_data_.permeability.empty()) K += crack_data_.permeability[e][q];
      const Eigen::Vector2d KgS = K * gS;
      const Eigen::Vector2d flux = mob.value * KgS;
      double src = 0.0;
      if (source_) src = source_(qp.x, ctx.t_new);
      for (int a = 0; a < 4; ++a) {
        R[el[a] * nf + W] += w * (dN[a].dot(flux) - qp.N[a] * src);
      }
      if (jv) {
        const double dkm = carb ? cst::dbulk_permeability_dtheta(thq, params_) : 0.0;
        for (int a = 0; a < 4; ++a) {
          const Eigen::Vector2d KdNa = K * dN[a];  // K symmetric
          const double gNa = dN[a].dot(KgS);
          for (int b = 0; b < 4; ++b) {
            add(a, W, b, W, w * (mob.d_ds * qp.N[b] * gNa + mob.value * KdNa.dot(dN[b])));
            if (carb) add(a, W, b, H, w * mob.value * dkm * dN[a].dot(gS) * qp.N[b] * dth[el[b]]);
          }
        }
      }
      if (carb) {
        const double phiq = crack_data_.phi.empty() ? 0.0 : crack_data_.phi[e][q];
        const auto D = cst::co2_diffusivity_with_derivatives(thq, Sq, phiq);
        for (int a = 0; a < 4; ++a) {
          const double ga = dN[a].dot(gc);
          R[el[a] * nf + C] += w * D.value * ga;
          if (jv) {
            for (int b = 0; b < 4; ++b) {
              add(a, C, b, C, w * D.value * dN[a].dot(dN[b]));
              add(a, C, b, W, w * D.d_ds * qp.N[b] * ga);
              add(a, C, b, H, w * D.d_dtheta * qp.N[b] * dth[el[b]] * ga);
            }
          }
        }
      }
    }
  }

  if (carb) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double rn = cst::neutralization_rate(c[i], ch[i], params_);
      R[i * 3 + H] += (a0 * ch[i] - ctx.hist_ch[i]) / dt + th[i] * S[i] * rn;
      if (jv) {
        const int* ns = node_slots_[static_cast<std::size_t>(i)].data();
        jv[ns[H * 3 + H]] += a0 / dt + kr * c[i] * (dth[i] * S[i] * ch[i] + th[i] * S[i]);
        jv[ns[H * 3 + W]] += th[i] * rn;
        jv[ns[H * 3 + C]] += th[i] * S[i] * kr * ch[i];
      }
    }
  }
}

Eigen::VectorXd TransportSolver::scaled_residual(const Eigen::VectorXd& u, const StepContext& ctx) const {
  Eigen::VectorXd R;
  system(u, ctx, R, nullptr, JacobianMode::analytic);
  return R;
}

void TransportSolver::system(const Eigen::VectorXd& u, const StepContext& ctx, Eigen::VectorXd& R,
                             Eigen::SparseMatrix<double>* J, JacobianMode mode) const {
  const bool analytic_j = J != nullptr && mode == JacobianMode::analytic;
  assemble(u, ctx, R, analytic_j ? J : nullptr);

  const auto n = static_cast<Eigen::Index>(mesh_->num_nodes());
  Eigen::VectorXd row_scale(n * nf_);
  for (Eigen::Index i = 0; i < n; ++i) {
    row_scale[i * nf_] = ctx.dt / volumes_[i];
    if (nf_ == 3) {
      row_scale[i * 3 + 1] = ctx.dt / (volumes_[i] * co2_scale_);
      row_scale[i * 3 + 2] = ctx.dt / params_.c_CaOH2_0;
    }
  }
  const Eigen::VectorXd uscale = unknown_scale();
  R.array() *= row_scale.array();
  for (const auto& [dof, k] : dirichlet_) {
    double target = bcs_[static_cast<std::size_t>(k)].value.at(ctx.t_new);
    if (dof % nf_ == 0) target = std::clamp(target, kSmin, kSmax);
    R[dof] = (u[dof] - target) / uscale[dof];
  }

  if (J == nullptr) return;
  if (analytic_j) {
    for (Eigen::Index col = 0; col < J->outerSize(); ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator it(*J, col); it; ++it) it.valueRef() *= row_scale[it.row()];
  } else {
    // central differences, column by column
    *J = pattern_;
    J->coeffs().setZero();
    Eigen::VectorXd up = u, Rp, Rm;
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      const double h = 1e-6 * std::max(std::abs(u[j]), uscale[j]);
      up[j] = u[j] + h;
      assemble(up, ctx, Rp, nullptr);
      up[j] = u[j] - h;
      assemble(up, ctx, Rm, nullptr);
      up[j] = u[j];
      for (Eigen::SparseMatrix<double>::InnerIterator it(*J, j); it; ++it)
        it.valueRef() = row_scale[it.row()] * (Rp[it.row()] - Rm[it.row()]) / (2.0 * h);
    }
  }
  double* jv = J->valuePtr();
  for (std::size_t r = 0; r < dirichlet_.size(); ++r) {
    for (int k : row_entries_[r]) jv[k] = 0.0;
    const int dof = dirichlet_[r].first;
    jv[node_slots_[static_cast<std::size_t>(dof / nf_)][static_cast<std::size_t>((dof % nf_) * nf_ + dof % nf_)]] =
        1.0 / uscale[dof];
  }
}

namespace {

FieldState like(const FieldState& s) { return s; }

}  // namespace

Eigen::VectorXd TransportSolver::water_residual(const FieldState& state_new, const FieldState& state_old,
                                                double dt) const {
  const auto ctx = make_context(state_old, nullptr, dt, state_old.t + dt);
  Eigen::VectorXd R;
  assemble(pack(state_new), ctx, R, nullptr);
  Eigen::VectorXd out(static_cast<Eigen::Index>(mesh_->num_nodes()));
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = R[i * nf_];
  return out;
}

Eigen::VectorXd TransportSolver::co2_residual(const FieldState& state_new, const FieldState& state_old,
                                              double dt) const {
  if (nf_ != 3) throw std::logic_error("co2_residual: carbonation is disabled");
  const auto ctx = make_context(state_old, nullptr, dt, state_old.t + dt);
  Eigen::VectorXd R;
  assemble(pack(state_new), ctx, R, nullptr);
  Eigen::VectorXd out(static_cast<Eigen::Index>(mesh_->num_nodes()));
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = R[i * 3 + 1];
  return out;
}

Eigen::VectorXd TransportSolver::caoh2_residual(const FieldState& state_new, const FieldState& state_old,
                                                double dt) const {
  if (nf_ != 3) throw std::logic_error("caoh2_residual: carbonation is disabled");
  const auto ctx = make_context(state_old, nullptr, dt, state_old.t + dt);
  Eigen::VectorXd R;
  assemble(pack(state_new), ctx, R, nullptr);
  Eigen::VectorXd out(static_cast<Eigen::Index>(mesh_->num_nodes()));
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = R[i * 3 + 2];
  return out;
}

Eigen::VectorXd TransportSolver::step_residual(const FieldState& trial, const FieldState& old, double dt) const {
  return scaled_residual(pack(trial), make_context(old, nullptr, dt, old.t + dt));
}

Eigen::SparseMatrix<double> TransportSolver::step_jacobian(const FieldState& trial, const FieldState& old, double dt,
                                                           JacobianMode mode) const {
  Eigen::VectorXd R;
  Eigen::SparseMatrix<double> J;
  system(pack(trial), make_context(old, nullptr, dt, old.t + dt), R, &J, mode);
  return J;
}

double TransportSolver::jacobian_check(const FieldState& trial, const FieldState& old, double dt) const {
  const auto Ja = step_jacobian(trial, old, dt, JacobianMode::analytic);
  const auto Jf = step_jacobian(trial, old, dt, JacobianMode::finite_difference);
  double worst = 0.0;
  for (Eigen::Index col = 0; col < Ja.outerSize(); ++col) {
    double scale = 0.0, diff = 0.0;
    for (int k = Ja.outerIndexPtr()[col]; k < Ja.outerIndexPtr()[col + 1]; ++k) {
      scale = std::max(scale, std::abs(Jf.valuePtr()[k]));
      diff = std::max(diff, std::abs(Ja.valuePtr()[k] - Jf.valuePtr()[k]));
    }
    if (scale > 0.0) worst = std::max(worst, diff / scale);
  }
  return worst;
}

namespace {

// ILUT factors held across Newton iterations; compute() is a no-op unless a
// refresh was requested, so a stale factorization keeps preconditioning.
class HeldIlut {
 public:
  using StorageIndex = int;
  HeldIlut() { ilut_.setDroptol(1e-4); ilut_.setFillfactor(10); }
  template <typename M>
  HeldIlut& analyzePattern(const M&) { return *this; }
  template <typename M>
  HeldIlut& factorize(const M& A) { return compute(A); }
  template <typename M>
  HeldIlut& compute(const M& A) {
    if (refresh_) {
      ilut_.compute(A);
      refresh_ = false;
    }
    return *this;
  }
  template <typename Rhs>
  Eigen::VectorXd solve(const Rhs& b) const { return ilut_.solve(b); }
  Eigen::ComputationInfo info() const { return ilut_.info(); }
  void request_refresh() { refresh_ = true; }
  bool fresh_since_request() const { return !refresh_; }

 private:
  Eigen::IncompleteLUT<double> ilut_;
  bool refresh_ = true;
};

// Direct LU for small systems; preconditioned BiCGSTAB above that, falling
// back to LU when the Krylov solve stalls even with fresh factors.
class LinearSolver {
 public:
  bool solve(const Eigen::SparseMatrix<double>& J, const Eigen::VectorXd& R, Eigen::VectorXd& du) {
    const Eigen::VectorXd rhs = -R;
    if (J.rows() > kIterativeThreshold) {
      for (int attempt = 0; attempt < 2; ++attempt) {
        if (attempt == 1) {
          if (fresh_) break;
          krylov_.preconditioner().request_refresh();
        }
        fresh_ = attempt == 1 || first_;
        first_ = false;
        krylov_.setTolerance(1e-12);
        krylov_.setMaxIterations(200);
        krylov_.compute(J);
        if (krylov_.preconditioner().info() != Eigen::Success) continue;
        du = krylov_.solve(rhs);
        if (krylov_.info() == Eigen::Success && du.allFinite()) {
          if (krylov_.iterations() > 40) krylov_.preconditioner().request_refresh();
          last_ = Last::krylov;
          return true;
        }
      }
    }
    if (!analyzed_) {
      lu_.analyzePattern(J);
      analyzed_ = true;
    }
    lu_.factorize(J);
    if (lu_.info() != Eigen::Success) return false;
    du = lu_.solve(rhs);
    last_ = Last::lu;
    return du.allFinite();
  }

  // solve with the operator of the previous call
  bool resolve(const Eigen::VectorXd& R, Eigen::VectorXd& du) {
    const Eigen::VectorXd rhs = -R;
    if (last_ == Last::krylov) {
      du = krylov_.solve(rhs);
      return krylov_.info() == Eigen::Success && du.allFinite();
    }
    if (last_ == Last::lu) {
      du = lu_.solve(rhs);
      return du.allFinite();
    }
    return false;
  }
  bool ready() const { return last_ != Last::none; }

 private:
  static constexpr Eigen::Index kIterativeThreshold = 3000;
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, HeldIlut> krylov_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  bool analyzed_ = false;
  bool first_ = true;
  bool fresh_ = false;
  enum class Last { none, krylov, lu } last_ = Last::none;
};

}  // namespace

StepResult TransportSolver::solve_time_step(const FieldState& old, double dt, const TimeStepPlan& plan,
                                            const FieldState* older) const {
  StepResult res;
  res.state = like(old);
  res.state.t = old.t + dt;
  apply_dirichlet(res.state, res.state.t);
  try {
    const auto ctx = make_context(old, older, dt, res.state.t);
    const Eigen::VectorXd uscale = unknown_scale();
    Eigen::VectorXd u = pack(res.state);
    res.clamp_magnitude = project(u);

    Eigen::VectorXd R;
    Eigen::SparseMatrix<double> J;
    LinearSolver lin;
    system(u, ctx, R, &J, options_.jacobian);
    const double r0 = R.norm();
    double last_du = std::numeric_limits<double>::infinity();
    for (int it = 0; it < plan.newton_max_iter; ++it) {
      if (!R.allFinite()) return res;
      // stiff rows (crack conductances) are measured against their diagonal
      const Eigen::VectorXd jd = J.diagonal().cwiseAbs().cwiseMax(1.0);
      const double rinf = R.cwiseQuotient(jd).lpNorm<Eigen::Infinity>();
      res.residual_norm = rinf;
      const bool done = rinf <= plan.newton_tol || (it > 0 && R.norm() <= plan.newton_tol * r0 && last_du <= 1e-6) ||
                        (last_du <= 1e-12 && rinf <= 100.0 * plan.newton_tol);
      Eigen::VectorXd du;
      // the final correction reuses the last operator
      const bool ok = done && lin.ready() ? lin.resolve(R, du) : lin.solve(J, R, du);
      if (!ok) return res;
      res.iterations = it + 1;
      if (done) {
        // final correction from the last linearization
        u += du;
        res.clamp_magnitude = std::max(res.clamp_magnitude, project(u));
        res.converged = true;
        break;
      }
      // outward moves at the saturation bounds are dropped before damping
      double max_ds = 0.0;
      for (Eigen::Index i = 0; i < du.size(); i += nf_) {
        if ((u[i] >= kSmax && du[i] > 0.0) || (u[i] <= kSmin && du[i] < 0.0)) du[i] = 0.0;
        max_ds = std::max(max_ds, std::abs(du[i]));
      }
      if (max_ds > 0.2) du *= 0.2 / max_ds;
      u += du;
      res.clamp_magnitude = std::max(res.clamp_magnitude, project(u));
      last_du = du.cwiseQuotient(uscale).lpNorm<Eigen::Infinity>();
      system(u, ctx, R, &J, options_.jacobian);
    }
    if (res.converged) unpack(u, res.state);
  } catch (const std::domain_error&) {
    res.converged = false;
  }
  return res;
}

FieldState run_simulation(const TransportSolver& solver, const FieldState& initial, const TimeStepPlan& plan,
                          const std::vector<double>& output_times, const RunCallbacks& cb, SimulationStats* stats) {
  plan.validate();
  SimulationStats local;
  SimulationStats& st = stats ? *stats : local;

  std::vector<double> outs;
  for (double t : output_times)
    if (t >= initial.t && t <= plan.t_end) outs.push_back(t);
  std::sort(outs.begin(), outs.end());
  outs.erase(std::unique(outs.begin(), outs.end()), outs.end());

  FieldState cur = initial;
  solver.apply_dirichlet(cur, cur.t);
  if (cb.on_step) cb.on_step(cur);
  std::size_t next_out = 0;
  const double t_tol = 1e-9 * std::max(1.0, plan.t_end);
  while (next_out < outs.size() && outs[next_out] <= cur.t + t_tol) {
    if (cb.on_output) cb.on_output(cur);
    ++next_out;
  }

  FieldState prev;
  bool have_prev = false;
  const bool bdf2 = solver.options().scheme == TimeScheme::bdf2;
  double dt = plan.dt_init;
  while (cur.t < plan.t_end - t_tol) {
    const double target = next_out < outs.size() ? std::min(outs[next_out], plan.t_end) : plan.t_end;
    double step = std::min(dt, target - cur.t);
    // avoid leaving a sliver before the target
    if (target - cur.t - step < 1e-3 * step) step = target - cur.t;
    const bool truncated = step < dt;

    const FieldState* older = nullptr;
    if (bdf2 && have_prev && step / (cur.t - prev.t) < 2.4) older = &prev;
    auto res = solver.solve_time_step(cur, step, plan, older);
    st.newton_iterations += res.iterations;
    if (!res.converged) {
      ++st.rejected_steps;
      dt = step * plan.shrink;
      if (dt < plan.dt_min) {
        std::string dump = cb.on_abort ? cb.on_abort(cur) : std::string();
        throw SimulationAborted("time step fell below dt_min at t = " + std::to_string(cur.t) + " s", cur, dump);
      }
      continue;
    }
    ++st.accepted_steps;
    st.max_clamp = std::max(st.max_clamp, res.clamp_magnitude);
    const double ds = (res.state.S - cur.S).lpNorm<Eigen::Infinity>();
    if (std::abs(res.state.t - target) <= t_tol) res.state.t = target;
    prev = std::move(cur);
    have_prev = true;
    cur = std::move(res.state);
    if (cb.on_step) cb.on_step(cur);
    while (next_out < outs.size() && outs[next_out] <= cur.t + t_tol) {
      if (cb.on_output) cb.on_output(cur);
      ++next_out;
    }

    if (ds > plan.max_saturation_change) {
      dt = step * std::max(plan.shrink, plan.max_saturation_change / ds);
    } else if (!truncated && res.iterations <= 6) {
      dt = step * plan.growth;
    }
    dt = std::clamp(dt, plan.dt_min, plan.dt_max);
  }
  return cur;
}

}  // namespace carbsim
