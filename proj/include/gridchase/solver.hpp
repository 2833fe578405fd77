#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gridchase/errors.hpp"

namespace gridchase {

struct SparseRow {
    std::vector<int> idx;
    std::vector<double> val;

    void add(int i, double v) {
        if (v == 0.0) return;
        idx.push_back(i);
        val.push_back(v);
    }
    double dot(const Eigen::VectorXd& x) const {
        double s = 0.0;
        for (size_t k = 0; k < idx.size(); ++k) s += val[k] * x[idx[k]];
        return s;
    }
    double squared_norm() const {
        double s = 0.0;
        for (double v : val) s += v * v;
        return s;
    }
    void scale(double a) {
        for (double& v : val) v *= a;
    }
    void scatter_add(Eigen::VectorXd& x, double a) const {
        for (size_t k = 0; k < idx.size(); ++k) x[idx[k]] += a * val[k];
    }
};

/// Second-order-cone block: s = h - G x, s0 >= ||s_{1:}||_2.
struct SocBlock {
    std::vector<SparseRow> g;
    Eigen::VectorXd h;
    int dim() const { return static_cast<int>(g.size()); }
};

/// Positive-semidefiniteness of the symmetric matrix whose upper triangle
/// (row-major) is x[var_index]. Enforced by eigenvector cutting planes added
/// around the conic solve.
struct PsdBlock {
    int n = 0;
    std::vector<int> var_index;  // length n(n+1)/2
};

/// min 1/2 x'Px + q'x
/// s.t. rows[i]'x <= row_rhs[i], SOC blocks, lb <= x <= ub, PSD slice.
/// The cost matrix is either diagonal (p_diag) or dense (p_dense).
struct ConicProgram {
    int num_vars = 0;
    Eigen::VectorXd p_diag;   // size num_vars, or empty
    Eigen::MatrixXd p_dense;  // num_vars^2, or empty
    Eigen::VectorXd q;
    Eigen::VectorXd lb, ub;   // +-inf entries allowed
    std::vector<SparseRow> rows;
    std::vector<double> row_rhs;
    std::vector<SocBlock> socs;
    std::optional<PsdBlock> psd;

    static ConicProgram least_distance(const Eigen::VectorXd& target);
    void init(int n);
    void add_row(SparseRow a, double b) {
        rows.push_back(std::move(a));
        row_rhs.push_back(b);
    }
    double objective(const Eigen::VectorXd& x) const;
    /// Worst violation over rows, SOC blocks, bounds, and the PSD slice.
    double max_violation(const Eigen::VectorXd& x) const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

const char* to_string(SolveStatus s);

struct SolverReport {
    SolveStatus status = SolveStatus::NumericalFailure;
    Eigen::VectorXd x;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double max_primal_residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    double wall_time_s = 0.0;
};

struct SolverSettings {
    double tol = 1e-7;
    int max_iter = 200;
    /// Phase-1 margin: min slack sigma* must clear this to count as feasible.
    double feas_tol = 1e-9;
    /// Optional strictly feasible start; skips the phase-1 solve when it
    /// verifies.
    std::optional<Eigen::VectorXd> warm_start;
    bool skip_phase1 = false;
    bool verbose = false;
};

/// Interior-point solve (primal-dual, Nesterov-Todd scaling over the
/// nonnegative-orthant and second-order cones). A phase-1 minimum-slack solve
/// decides feasibility first unless a verified feasible start is supplied.
SolverReport solve(const ConicProgram& prog, const SolverSettings& settings = {});

struct KktResiduals {
    double stationarity = 0.0;
    double primal = 0.0;
    double complementarity = 0.0;
};

/// Multiplier-free audit residuals at a candidate primal point: primal
/// violation, distance from -grad f to the cone of active constraint normals,
/// and the complementarity of the fitted multipliers.
KktResiduals kkt_residuals(const ConicProgram& prog, const Eigen::VectorXd& x,
                           double active_tol = 1e-6);

}  // namespace gridchase
