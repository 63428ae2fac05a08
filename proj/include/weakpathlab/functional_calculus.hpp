#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "weakpathlab/functionals.hpp"
#include "weakpathlab/models.hpp"
#include "weakpathlab/mollifier.hpp"
#include "weakpathlab/random.hpp"
#include "weakpathlab/stats.hpp"

namespace wpl {

/// Everything a nested estimator needs: dynamics, test functional and the
/// fine grid on which continuations X^{t,x} are simulated by Euler. The
/// mollifier operator is built once and shared by all workers.
struct NestedSetup {
    SdeModel model;
    PathFunctional f;
    GridPtr grid;
    std::shared_ptr<const MollifierOperator> mollifier;

    double epsilon() const { return mollifier->spec().epsilon; }
};

/// epsilon <= 0 selects the default width of two fine intervals.
NestedSetup make_nested_setup(SdeModel model, PathFunctional f, GridPtr fine, double epsilon = 0.0,
                              int kernel_samples = 32);

struct NestedEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t inner_samples = 0;
    double epsilon = 0.0;
    std::size_t fine_steps = 0;
    SeedSpec seed;
};

struct ResidualReport {
    double residual = 0.0;
    double std_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::map<std::string, double> components;
};

/// Stream for purpose `tag` of outer sample `outer`; inner draws use substream(key, i).
SeedSpec nested_key(const SeedSpec& master, std::uint64_t outer, std::uint64_t tag);

/// F^eps_t(x) = E f^eps(x_t (+) X^{t,x(t)}), with x given on the first nodes of
/// the setup grid and t its last node. Continuation increments are drawn
/// backwards from T, so estimates at different t share noise on common slots.
NestedEstimate estimate_F(const NestedSetup& setup, const DiscretePath& prefix, std::size_t n_inner,
                          const SeedSpec& seed, const Executor& exec = Executor{});

/// Default vertical bump 1e-2 (1 + |x(t)|).
double default_bump(double x);

struct VerticalDerivative {
    NestedEstimate bump;      // (F(x^{+h}) - F(x^{-h})) / 2h
    NestedEstimate pathwise;  // E Df^eps(X)(1_[t,T] Z)
    double difference = 0.0;
    double difference_se = 0.0;
    double tolerance = 0.0;  // 4 SE of the per-sample difference + h^2 (1 + |value|)
    bool agree = false;
    double h = 0.0;
};

/// bump <= 0 selects default_bump.
VerticalDerivative vertical_derivative(const NestedSetup& setup, const DiscretePath& prefix, std::size_t n_inner,
                                       double bump, const SeedSpec& seed, const Executor& exec = Executor{});

/// (F(x^{+h}) - 2 F(x) + F(x^{-h})) / h^2 with common random numbers.
NestedEstimate second_vertical_derivative(const NestedSetup& setup, const DiscretePath& prefix, std::size_t n_inner,
                                          double bump, const SeedSpec& seed, const Executor& exec = Executor{});

/// (F_{t+h}(x_{t,h}) - F_t(x)) / h. The subtracted F_t uses the antithetic pair
/// of the increments on [t, t+h], the rest of the noise is shared with the
/// extended path. t + h must be a node of the setup grid.
NestedEstimate horizontal_derivative(const NestedSetup& setup, const DiscretePath& prefix, std::size_t n_inner,
                                     double h_step, const SeedSpec& seed, const Executor& exec = Executor{});

enum class KolmogorovFault { None, DropHalfFactor };

/// Allowance factor for the O(h) bias of the forward horizontal difference:
/// tolerance = 4 SE + kKolmogorovBiasFactor * h * S with
/// S = |D F| + |b grad F| + 1/2 sigma^2 |grad^2 F|.
inline constexpr double kKolmogorovBiasFactor = 2.0;

/// D_t F + b grad F + 1/2 sigma^2 grad^2 F at one prefix, horizontal step of
/// `steps` fine intervals. The prefix must be Linear and start at xi0.
ResidualReport kolmogorov_residual(const NestedSetup& setup, const DiscretePath& prefix, std::size_t n_inner,
                                   std::size_t steps, const SeedSpec& seed,
                                   KolmogorovFault fault = KolmogorovFault::None, const Executor& exec = Executor{});

/// Same residual pooled over n_outer prefixes X_{[0,t]} drawn by fine Euler from xi0.
ResidualReport kolmogorov_check(const NestedSetup& setup, double t, std::size_t n_outer, std::size_t n_inner,
                                std::size_t steps, const SeedSpec& seed,
                                KolmogorovFault fault = KolmogorovFault::None, const Executor& exec = Executor{});

/// E[F_t(X_t) - F_s(X_s)] along common outer fine-Euler paths; passes if |gap| <= 4 SE.
ResidualReport martingale_gap(const NestedSetup& setup, double s, double t, std::size_t n_outer, std::size_t n_inner,
                              const SeedSpec& seed, const Executor& exec = Executor{});

/// Quadratic-variation term of the Ito sum for F_t(x) = x(t)^2.
/// Realized uses (dW_k)^2, which makes the residual vanish by telescoping;
/// Bracket uses [W] increments dt_k and leaves the discretization error.
enum class QvMode { Realized, Bracket };

/// F_T - F_0 - sum 2 W(tau_k) dW_k - sum q_k for the path w.
/// Tolerance: rounding level for Realized, 4 sqrt(2 sum dt_k^2) for Bracket.
ResidualReport ito_residual(const BrownianPath& w, QvMode mode = QvMode::Realized);

struct ItoCheck {
    std::vector<double> mesh;
    std::vector<double> rms;
    std::vector<double> ratio;  // rms[i] / rms[i + 1]
    double ratio_lo = 1.2;
    double ratio_hi = 1.7;
    bool passed = false;
};

/// RMS residual on meshes T/base_steps, ..., T/(base_steps 2^halvings); each
/// sample draws the finest path and subsamples it for the coarser meshes.
ItoCheck ito_check(double horizon, std::size_t base_steps, int halvings, std::size_t n_samples, const SeedSpec& seed,
                   QvMode mode = QvMode::Bracket, const Executor& exec = Executor{});

struct ErrorRepresentationSpec {
    double horizon = 0.25;
    std::size_t coarse_steps = 2;
    std::size_t refinement = 64;  // fine steps per coarse step; 1 makes X~ and X coincide
    std::size_t quadrature_per_step = 0;  // 0: every fine node; otherwise must divide refinement
    double epsilon = 0.0;  // <= 0: two fine intervals
    int kernel_samples = 32;
    std::size_t n_outer = 2000;
    std::size_t n_inner = 100;
    double bump = 0.0;       // <= 0: default_bump
    double budget_cap = 5e9;  // projected continuation count
    SeedSpec seed;
};

struct ErrorRepresentation {
    NestedEstimate lhs;  // E f^eps(X~_T) - E f^eps(X_T)
    NestedEstimate rhs;  // E int (grad F (b~ - b) + 1/2 grad^2 F (sigma~^2 - sigma^2)) dt
    double difference = 0.0;
    double difference_se = 0.0;
    double tolerance = 0.0;  // 4 SE + 1e-12 (1 + |lhs| + |rhs|)
    bool passed = false;
    double projected_continuations = 0.0;
};

/// Both sides of the weak error representation on a small instance
/// (T <= 0.5, at most 4 coarse steps). The time integral is a composite rule on
/// quadrature_per_step points per coarse step: each point t_j carries the width
/// of the interval ending at it, grad F is taken at t_j and the reference
/// coefficient b(X~), sigma(X~) at the fine node just before t_j. With every
/// fine node this is the telescoped fine-grid identity, exact up to second
/// order terms. Throws BudgetExceeded before sampling if the projected
/// number of continuations exceeds budget_cap.
ErrorRepresentation error_representation_sides(const SdeModel& model, const PathFunctional& f,
                                               const ErrorRepresentationSpec& spec,
                                               const Executor& exec = Executor{});

}  // namespace wpl
