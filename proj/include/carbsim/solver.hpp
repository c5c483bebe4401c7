#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "carbsim/mesh.hpp"
#include "carbsim/params.hpp"
#include "carbsim/phasefield.hpp"

namespace carbsim {

enum class Unknown { saturation, co2, caoh2 };

std::string_view to_string(Unknown u);
Unknown unknown_from_string(std::string_view text);

/// Dirichlet value as a function of time: a constant or
/// value + amplitude * sin(2 pi t / period + phase).
struct BoundaryValue {
  enum class Kind { constant, sine };
  Kind kind = Kind::constant;
  double value = 0.0;
  double amplitude = 0.0;
  double period = 1.0;  // s
  double phase = 0.0;   // rad

  static BoundaryValue constant(double v) { return {Kind::constant, v, 0.0, 1.0, 0.0}; }
  static BoundaryValue sine(double offset, double amplitude, double period, double phase) {
    return {Kind::sine, offset, amplitude, period, phase};
  }
  double at(double t) const;
  bool operator==(const BoundaryValue&) const = default;
};

/// Dirichlet condition on every node of the facets carrying `marker`.
/// Markers without a condition are zero-flux. Later conditions win at shared nodes.
struct BoundaryCondition {
  std::string marker;
  Unknown unknown = Unknown::saturation;
  BoundaryValue value;
  bool operator==(const BoundaryCondition&) const = default;
};

struct TimeStepPlan {
  double t_end = 0.0;  // s
  double dt_init = 1.0;
  double dt_min = 1e-8;
  double dt_max = 1e30;
  double newton_tol = 1e-8;
  int newton_max_iter = 25;
  double growth = 1.2;
  double shrink = 0.5;
  /// Largest nodal saturation change per step before the next step is shortened.
  double max_saturation_change = 0.1;

  void validate() const;
  bool operator==(const TimeStepPlan&) const = default;
};

enum class TimeScheme { implicit_euler, bdf2 };
enum class JacobianMode { analytic, finite_difference };

struct SolverOptions {
  bool carbonation = true;
  bool lumped_storage = true;
  /// Quadrature of the flux integrals. The nodal rule gives an M-matrix on
  /// rectangles for diagonal tensors, which keeps strongly anisotropic crack
  /// bands on stretched elements free of over- and undershoots.
  QuadratureRule flux_quadrature = QuadratureRule::nodal;
  TimeScheme scheme = TimeScheme::implicit_euler;
  JacobianMode jacobian = JacobianMode::analytic;
  bool operator==(const SolverOptions&) const = default;
};

/// Primary nodal unknowns at time t.
struct FieldState {
  double t = 0.0;
  Eigen::VectorXd S;
  Eigen::VectorXd c_co2;  // mol/m^3 of gas-filled pore space
  Eigen::VectorXd c_ch;   // mol/m^3
};

/// Volumetric water source (rate of theta*S per second) used for manufactured solutions.
using WaterSource = std::function<double(Point x, double t)>;

struct StepResult {
  bool converged = false;
  FieldState state;
  int iterations = 0;
  double residual_norm = 0.0;
  /// Largest correction applied when projecting Newton iterates into the admissible box.
  double clamp_magnitude = 0.0;
};

/// Simulation abort: dt fell below dt_min.
class SimulationAborted : public std::runtime_error {
 public:
  SimulationAborted(const std::string& what, FieldState state, std::string dump_path)
      : std::runtime_error(what), state_(std::move(state)), dump_path_(std::move(dump_path)) {}
  const FieldState& state() const { return state_; }
  const std::string& dump_path() const { return dump_path_; }

 private:
  FieldState state_;
  std::string dump_path_;
};

/// Fully implicit finite-element discretization of coupled water transport,
/// CO2 diffusion-reaction and Ca(OH)2 depletion, solved by monolithic Newton.
class TransportSolver {
 public:
  TransportSolver(std::shared_ptr<const Mesh> mesh, MaterialParams params, Eigen::VectorXd theta_0,
                  std::vector<CrackField> cracks, std::vector<BoundaryCondition> bcs, SolverOptions options = {});

  const Mesh& mesh() const { return *mesh_; }
  const MaterialParams& params() const { return params_; }
  const SolverOptions& options() const { return options_; }
  const Eigen::VectorXd& initial_porosity() const { return theta_0_; }
  const std::vector<CrackField>& cracks() const { return cracks_; }
  const std::vector<BoundaryCondition>& boundary_conditions() const { return bcs_; }
  const Eigen::VectorXd& nodal_volumes() const { return volumes_; }
  const CrackQuadratureData& crack_data() const { return crack_data_; }
  void set_water_source(WaterSource source) { source_ = std::move(source); }

  /// Number of coupled unknowns per node (1 without carbonation, 3 with).
  int fields_per_node() const { return nf_; }

  /// Nodal porosity theta(c_CaOH2) of a state.
  Eigen::VectorXd porosity(const FieldState& state) const;
  /// Total water content integral of theta*S (lumped).
  double water_content(const FieldState& state) const;

  /// Galerkin residual of the water balance for one implicit Euler step (no Dirichlet rows).
  Eigen::VectorXd water_residual(const FieldState& state_new, const FieldState& state_old, double dt) const;
  /// Galerkin residual of the CO2 balance for one implicit Euler step.
  Eigen::VectorXd co2_residual(const FieldState& state_new, const FieldState& state_old, double dt) const;
  /// Pointwise Ca(OH)2 balance (c - c_old)/dt + theta S R_n per node.
  Eigen::VectorXd caoh2_residual(const FieldState& state_new, const FieldState& state_old, double dt) const;

  /// Applies the Dirichlet values at time t to a state (saturation clamped).
  void apply_dirichlet(FieldState& state, double t) const;

  /// One Newton solve for the state at old.t + dt. `older` enables BDF2.
  StepResult solve_time_step(const FieldState& old, double dt, const TimeStepPlan& plan,
                             const FieldState* older = nullptr) const;

  /// Largest column-wise relative difference between the analytic and the
  /// finite-difference Jacobian of the scaled step residual at `trial`.
  double jacobian_check(const FieldState& trial, const FieldState& old, double dt) const;

  /// Scaled step residual and Jacobian (Dirichlet rows included), exposed for verification.
  Eigen::VectorXd step_residual(const FieldState& trial, const FieldState& old, double dt) const;
  Eigen::SparseMatrix<double> step_jacobian(const FieldState& trial, const FieldState& old, double dt,
                                            JacobianMode mode) const;

 private:
  struct StepContext;

  StepContext make_context(const FieldState& old, const FieldState* older, double dt, double t_new) const;
  // Physical residual (and Jacobian) without scaling or Dirichlet rows.
  void assemble(const Eigen::VectorXd& u, const StepContext& ctx, Eigen::VectorXd& residual,
                Eigen::SparseMatrix<double>* jacobian) const;
  // Scaled residual with Dirichlet rows; Jacobian according to `mode`.
  void system(const Eigen::VectorXd& u, const StepContext& ctx, Eigen::VectorXd& residual,
              Eigen::SparseMatrix<double>* jacobian, JacobianMode mode) const;
  Eigen::VectorXd scaled_residual(const Eigen::VectorXd& u, const StepContext& ctx) const;
  Eigen::VectorXd pack(const FieldState& s) const;
  void unpack(const Eigen::VectorXd& u, FieldState& s) const;
  Eigen::VectorXd unknown_scale() const;
  double project(Eigen::VectorXd& u) const;
  int find_slot(int row, int col) const;
  void build_pattern();
  void build_dirichlet();

  std::shared_ptr<const Mesh> mesh_;
  MaterialParams params_;
  Eigen::VectorXd theta_0_;
  std::vector<CrackField> cracks_;
  std::vector<BoundaryCondition> bcs_;
  SolverOptions options_;
  WaterSource source_;

  int nf_ = 1;
  Eigen::VectorXd volumes_;
  CrackQuadratureData crack_data_;
  std::vector<std::array<std::array<double, 4>, 4>> element_mass_;
  Eigen::SparseMatrix<double> pattern_;
  std::vector<std::vector<int>> element_slots_;  // per element, (4 nf)^2 value indices
  std::vector<std::vector<int>> row_entries_;    // value indices of each Dirichlet row
  std::vector<std::vector<int>> node_slots_;    // per node, nf x nf block value indices
  // Dirichlet dof -> index into bcs_.
  std::vector<std::pair<int, int>> dirichlet_;
  std::vector<char> is_dirichlet_;
  double co2_scale_ = 1.0;
};

/// Runs an adaptive implicit time integration from `initial` to plan.t_end,
/// stopping exactly at every output time. `on_step` sees the initial state
/// and every accepted state; `on_output` sees the states at output times.
struct SimulationStats {
  int accepted_steps = 0;
  int rejected_steps = 0;
  int newton_iterations = 0;
  double max_clamp = 0.0;
};

struct RunCallbacks {
  std::function<void(const FieldState&)> on_step;
  std::function<void(const FieldState&)> on_output;
  /// Called with the last accepted state when the run aborts; returns the dump path.
  std::function<std::string(const FieldState&)> on_abort;
};

FieldState run_simulation(const TransportSolver& solver, const FieldState& initial, const TimeStepPlan& plan,
                          const std::vector<double>& output_times, const RunCallbacks& callbacks = {},
                          SimulationStats* stats = nullptr);

}  // namespace carbsim
