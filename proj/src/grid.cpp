#include "gridchase/grid.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>

#include "json.hpp"

namespace gridchase {

RadialNetwork RadialNetwork::build(int n, std::vector<Edge> edges,
                                   std::vector<int> controllable) {
    if (edges.empty()) throw Error("network: empty edge list");
    if (n < 1) throw Error("network: bus count must be >= 1");

    for (const Edge& e : edges) {
        if (e.from < 0 || e.from > n || e.to < 0 || e.to > n)
            throw Error("network: bus id out of range [0, " +
                        std::to_string(n) + "]");
        if (!(e.r_ohm > 0.0) || !(e.x_ohm > 0.0))
            throw NonpositiveImpedance("network: edge " +
                                       std::to_string(e.from) + "->" +
                                       std::to_string(e.to) +
                                       " has nonpositive impedance");
    }

    // Cycle check on the directed edge set (three-color DFS), before any
    // parent-uniqueness check so inputs like {0->1, 1->2, 2->1} report the
    // cycle rather than the duplicate child.
    {
        std::vector<std::vector<int>> adj(n + 1);
        for (const Edge& e : edges) adj[e.from].push_back(e.to);
        std::vector<int> color(n + 1, 0);  // 0 white, 1 gray, 2 black
        std::vector<std::pair<int, size_t>> stack;
        for (int s = 0; s <= n; ++s) {
            if (color[s] != 0) continue;
            color[s] = 1;
            stack.push_back({s, 0});
            while (!stack.empty()) {
                auto& [u, k] = stack.back();
                if (k < adj[u].size()) {
                    int v = adj[u][k++];
                    if (color[v] == 1)
                        throw CycleDetected("network: cycle through bus " +
                                            std::to_string(v));
                    if (color[v] == 0) {
                        color[v] = 1;
                        stack.push_back({v, 0});
                    }
                } else {
                    color[u] = 2;
                    stack.pop_back();
                }
            }
        }
    }

    std::vector<int> parent(n + 1, -1);
    for (const Edge& e : edges) {
        if (e.to == 0) throw Error("network: substation cannot be a child");
        if (parent[e.to] != -1)
            throw DuplicateChild("network: bus " + std::to_string(e.to) +
                                 " has two parents");
        parent[e.to] = e.from;
    }

    RadialNetwork net;
    net.n_ = n;
    net.parent_ = parent;
    net.depth_.assign(n + 1, -1);
    net.prefix_r_.assign(n + 1, 0.0);
    net.prefix_x_.assign(n + 1, 0.0);
    net.depth_[0] = 0;

    // Resolve depth/prefix by walking to the root; unreachable buses and
    // missing edges both surface as DisconnectedBus.
    for (int b = 1; b <= n; ++b) {
        std::vector<int> chain;
        int cur = b;
        while (cur != -1 && net.depth_[cur] < 0) {
            chain.push_back(cur);
            cur = parent[cur];
        }
        if (cur == -1)
            throw DisconnectedBus("network: bus " + std::to_string(b) +
                                  " is not connected to the substation");
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
            int p = parent[*it];
            net.depth_[*it] = net.depth_[p] + 1;
        }
    }
    if (static_cast<int>(edges.size()) != n)
        throw DisconnectedBus("network: expected " + std::to_string(n) +
                              " edges for a spanning tree, got " +
                              std::to_string(edges.size()));

    for (const Edge& e : edges) {
        net.prefix_r_[e.to] = e.r_ohm;
        net.prefix_x_[e.to] = e.x_ohm;
    }
    // accumulate root-path sums in depth order
    std::vector<int> order(n);
    for (int b = 1; b <= n; ++b) order[b - 1] = b;
    std::sort(order.begin(), order.end(), [&](int a, int b2) {
        return net.depth_[a] < net.depth_[b2];
    });
    for (int b : order) {
        int p = parent[b];
        net.prefix_r_[b] += net.prefix_r_[p];
        net.prefix_x_[b] += net.prefix_x_[p];
    }

    std::set<int> cset(controllable.begin(), controllable.end());
    for (int c : cset)
        if (c < 1 || c > n)
            throw Error("network: controllable bus " + std::to_string(c) +
                        " outside {1..n}");
    net.controllable_.assign(cset.begin(), cset.end());
    net.edges_ = std::move(edges);
    return net;
}

int RadialNetwork::lca(int a, int b) const {
    while (depth_[a] > depth_[b]) a = parent_[a];
    while (depth_[b] > depth_[a]) b = parent_[b];
    while (a != b) {
        a = parent_[a];
        b = parent_[b];
    }
    return a;
}

SensitivityModel sensitivity_matrices(const RadialNetwork& net) {
    const int n = net.bus_count();
    SensitivityModel m;
    m.R.resize(n, n);
    m.X.resize(n, n);
    bool zero_offdiag = false;
    for (int i = 1; i <= n; ++i) {
        for (int j = i; j <= n; ++j) {
            const int a = net.lca(i, j);
            const double rij = 2.0 * net.path_r(a);
            const double xij = 2.0 * net.path_x(a);
            m.R(i - 1, j - 1) = rij;
            m.R(j - 1, i - 1) = rij;
            m.X(i - 1, j - 1) = xij;
            m.X(j - 1, i - 1) = xij;
            if (i != j && xij == 0.0) zero_offdiag = true;
        }
    }
    if (zero_offdiag)
        std::cerr << "note: sensitivity matrices have zero off-diagonal "
                     "entries (branches meet only at the substation)\n";
    return m;
}

RadialNetwork load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open network file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw SchemaError("network json parse error: " + std::string(e.what()));
    }
    for (auto& [key, _] : j.items())
        if (key != "n" && key != "edges" && key != "controllable")
            throw SchemaError("network json: unknown key '" + key + "'");
    if (!j.contains("n") || !j.contains("edges") || !j.contains("controllable"))
        throw SchemaError("network json: required keys n, edges, controllable");

    std::vector<Edge> edges;
    for (const auto& je : j["edges"]) {
        for (auto& [key, _] : je.items())
            if (key != "from" && key != "to" && key != "r_ohm" && key != "x_ohm")
                throw SchemaError("network json edge: unknown key '" + key + "'");
        Edge e;
        e.from = je.at("from").get<int>();
        e.to = je.at("to").get<int>();
        e.r_ohm = je.at("r_ohm").get<double>();
        e.x_ohm = je.at("x_ohm").get<double>();
        if (!std::isfinite(e.r_ohm) || !std::isfinite(e.x_ohm))
            throw NonFiniteValue("network json: non-finite impedance");
        edges.push_back(e);
    }
    return RadialNetwork::build(j.at("n").get<int>(), std::move(edges),
                                j.at("controllable").get<std::vector<int>>());
}

void save_network(const RadialNetwork& net, const std::string& path) {
    nlohmann::json j;
    j["n"] = net.bus_count();
    j["edges"] = nlohmann::json::array();
    for (const Edge& e : net.edges())
        j["edges"].push_back({{"from", e.from},
                              {"to", e.to},
                              {"r_ohm", e.r_ohm},
                              {"x_ohm", e.x_ohm}});
    j["controllable"] = net.controllable();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write network file: " + path);
    out << j.dump(2) << "\n";
}

Vector to_triangle_vector(const Matrix& A) {
    const int n = static_cast<int>(A.rows());
    Vector v(triangle_dim(n));
    int k = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) v[k++] = A(i, j);
    return v;
}

Matrix from_triangle_vector(const Vector& v, int n) {
    if (v.size() != triangle_dim(n))
        throw DimensionMismatch("triangle vector has wrong length");
    Matrix A(n, n);
    int k = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            A(i, j) = v[k];
            A(j, i) = v[k];
            ++k;
        }
    return A;
}

static void require_symmetric(const Matrix& A) {
    if (A.rows() != A.cols())
        throw AsymmetricInput("matrix is not square");
    const double dev = (A - A.transpose()).cwiseAbs().maxCoeff();
    if (dev > 1e-9)
        throw AsymmetricInput("matrix asymmetry " + std::to_string(dev) +
                              " exceeds 1e-9");
}

double triangle_norm(const Matrix& A) {
    require_symmetric(A);
    double s = 0.0;
    for (int i = 0; i < A.rows(); ++i)
        for (int j = i; j < A.cols(); ++j) s += A(i, j) * A(i, j);
    return std::sqrt(s);
}

double triangle_distance(const Matrix& A, const Matrix& B) {
    if (A.rows() != B.rows() || A.cols() != B.cols())
        throw DimensionMismatch("triangle_distance: shape mismatch");
    return triangle_norm(A - B);
}

double row_infnorm_bound(const Matrix& A, const Vector& b) {
    if (A.cols() != b.size())
        throw DimensionMismatch("row_infnorm_bound: A cols != b size");
    return (A * b).cwiseAbs().maxCoeff();
}

}  // namespace gridchase
