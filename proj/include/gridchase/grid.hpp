#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gridchase/errors.hpp"

namespace gridchase {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Edge {
    int from = 0;
    int to = 0;
    double r_ohm = 0.0;
    double x_ohm = 0.0;
};

/// Radial distribution feeder: a spanning tree over buses 0..n rooted at the
/// substation (bus 0). Branch buses are 1..n.
class RadialNetwork {
public:
    static RadialNetwork build(int n, std::vector<Edge> edges,
                               std::vector<int> controllable);

    int bus_count() const { return n_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<int>& controllable() const { return controllable_; }

    int parent(int bus) const { return parent_[bus]; }
    int depth(int bus) const { return depth_[bus]; }
    /// Sum of line resistances along the root path 0 -> bus.
    double path_r(int bus) const { return prefix_r_[bus]; }
    double path_x(int bus) const { return prefix_x_[bus]; }
    /// Lowest common ancestor by parent-pointer walk; O(depth).
    int lca(int a, int b) const;

private:
    RadialNetwork() = default;
    int n_ = 0;
    std::vector<Edge> edges_;
    std::vector<int> controllable_;
    std::vector<int> parent_;    // parent_[0] == -1
    std::vector<int> depth_;     // depth_[0] == 0
    std::vector<double> prefix_r_;
    std::vector<double> prefix_x_;
};

/// The pair (R, X) of bus-to-bus sensitivity matrices, units Ohm.
struct SensitivityModel {
    Matrix R;
    Matrix X;
};

/// R_ij = 2 * sum of r over the edges shared by the root paths of i and j
/// (X_ij likewise); evaluated as 2 * prefix(lca(i, j)).
SensitivityModel sensitivity_matrices(const RadialNetwork& net);

RadialNetwork load_network(const std::string& path);
void save_network(const RadialNetwork& net, const std::string& path);

// --- symmetric-matrix vector-space machinery ---------------------------------

/// m = n(n+1)/2
inline int triangle_dim(int n) { return n * (n + 1) / 2; }

/// Row-major upper-triangle flattening index for 0 <= i <= j < n.
inline int triangle_index(int n, int i, int j) {
    return i * n - i * (i - 1) / 2 + (j - i);
}

Vector to_triangle_vector(const Matrix& A);
Matrix from_triangle_vector(const Vector& v, int n);

/// sqrt(sum_{i<=j} A_ij^2). Requires A symmetric within 1e-9 (absolute).
double triangle_norm(const Matrix& A);

/// Distance ||A - B|| in the triangle norm.
double triangle_distance(const Matrix& A, const Matrix& B);

/// Exact ||A b||_inf; pairs with the bound ||A b||_inf <= ||A||_tri * ||b||_2.
double row_infnorm_bound(const Matrix& A, const Vector& b);

}  // namespace gridchase
