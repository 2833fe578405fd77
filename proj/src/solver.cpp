#include "gridchase/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

namespace gridchase {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::Infeasible: return "Infeasible";
        case SolveStatus::Unbounded: return "Unbounded";
        case SolveStatus::NumericalFailure: return "NumericalFailure";
    }
    return "?";
}

static constexpr double kInf = std::numeric_limits<double>::infinity();

void ConicProgram::init(int n) {
    num_vars = n;
    q = VectorXd::Zero(n);
    lb = VectorXd::Constant(n, -kInf);
    ub = VectorXd::Constant(n, kInf);
}

ConicProgram ConicProgram::least_distance(const VectorXd& target) {
    ConicProgram p;
    p.init(static_cast<int>(target.size()));
    p.p_diag = VectorXd::Ones(target.size());
    p.q = -target;
    return p;
}

double ConicProgram::objective(const VectorXd& x) const {
    double v = q.dot(x);
    if (p_diag.size() > 0)
        v += 0.5 * x.dot(p_diag.cwiseProduct(x));
    else if (p_dense.size() > 0)
        v += 0.5 * x.dot(p_dense * x);
    return v;
}

static double psd_min_eig(const PsdBlock& blk, const VectorXd& x,
                          VectorXd* eigvec = nullptr) {
    MatrixXd A(blk.n, blk.n);
    int k = 0;
    for (int i = 0; i < blk.n; ++i)
        for (int j = i; j < blk.n; ++j) {
            const double v = x[blk.var_index[k++]];
            A(i, j) = v;
            A(j, i) = v;
        }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
    if (eigvec) *eigvec = es.eigenvectors().col(0);
    return es.eigenvalues()[0];
}

double ConicProgram::max_violation(const VectorXd& x) const {
    double worst = 0.0;
    for (size_t i = 0; i < rows.size(); ++i)
        worst = std::max(worst, rows[i].dot(x) - row_rhs[i]);
    for (const SocBlock& c : socs) {
        const int d = c.dim();
        double head = c.h[0] - c.g[0].dot(x);
        double tail = 0.0;
        for (int r = 1; r < d; ++r) {
            const double sr = c.h[r] - c.g[r].dot(x);
            tail += sr * sr;
        }
        worst = std::max(worst, std::sqrt(tail) - head);
    }
    for (int i = 0; i < num_vars; ++i) {
        if (lb.size() > 0 && lb[i] > -kInf) worst = std::max(worst, lb[i] - x[i]);
        if (ub.size() > 0 && ub[i] < kInf) worst = std::max(worst, x[i] - ub[i]);
    }
    if (psd) worst = std::max(worst, -psd_min_eig(*psd, x));
    return worst;
}

// ---------------------------------------------------------------------------
// internal canonical form: min 1/2 x'Px + q'x  s.t.  s = h - Gx in K,
// K = orthant(l) x SOC(d_1) x ... The orthant part keeps general rows and
// variable bounds separate so the KKT assembly can exploit the structure.
// ---------------------------------------------------------------------------

namespace {

struct Canon {
    int nx = 0;
    VectorXd pd;  // diagonal cost, or empty
    MatrixXd P;   // dense cost, or empty
    VectorXd q;

    std::vector<SparseRow> rows;
    VectorXd rhs;
    std::vector<int> bnd_var;   // bound index -> variable
    VectorXd bnd_val;           // rhs in s = h - Gx form
    std::vector<double> bnd_sign;  // G entry: -1 for lower bounds, +1 for upper

    std::vector<SocBlock> socs;

    int n_gen = 0, n_bnd = 0, l = 0;
    std::vector<int> soc_off;
    int cone_dim = 0;
    int degree = 0;

    double hnorm = 1.0, qnorm = 1.0;

    void finalize() {
        n_gen = static_cast<int>(rows.size());
        n_bnd = static_cast<int>(bnd_var.size());
        l = n_gen + n_bnd;
        soc_off.clear();
        int off = l;
        for (const SocBlock& c : socs) {
            soc_off.push_back(off);
            off += c.dim();
        }
        cone_dim = off;
        degree = l + static_cast<int>(socs.size());
        double h2 = 0.0;
        for (int i = 0; i < n_gen; ++i) h2 += rhs[i] * rhs[i];
        for (int i = 0; i < n_bnd; ++i) h2 += bnd_val[i] * bnd_val[i];
        for (const SocBlock& c : socs) h2 += c.h.squaredNorm();
        hnorm = std::max(1.0, std::sqrt(h2));
        qnorm = std::max(1.0, q.norm());
    }

    void mul_G(const VectorXd& x, VectorXd& out) const {
        out.resize(cone_dim);
        for (int i = 0; i < n_gen; ++i) out[i] = rows[i].dot(x);
        for (int i = 0; i < n_bnd; ++i)
            out[n_gen + i] = bnd_sign[i] * x[bnd_var[i]];
        for (size_t k = 0; k < socs.size(); ++k) {
            const SocBlock& c = socs[k];
            const int off = soc_off[k];
            for (int r = 0; r < c.dim(); ++r) out[off + r] = c.g[r].dot(x);
        }
    }

    void mul_Gt(const VectorXd& y, VectorXd& out) const {
        out = VectorXd::Zero(nx);
        for (int i = 0; i < n_gen; ++i) rows[i].scatter_add(out, y[i]);
        for (int i = 0; i < n_bnd; ++i)
            out[bnd_var[i]] += bnd_sign[i] * y[n_gen + i];
        for (size_t k = 0; k < socs.size(); ++k) {
            const SocBlock& c = socs[k];
            const int off = soc_off[k];
            for (int r = 0; r < c.dim(); ++r)
                c.g[r].scatter_add(out, y[off + r]);
        }
    }

    void get_h(VectorXd& out) const {
        out.resize(cone_dim);
        for (int i = 0; i < n_gen; ++i) out[i] = rhs[i];
        for (int i = 0; i < n_bnd; ++i) out[n_gen + i] = bnd_val[i];
        for (size_t k = 0; k < socs.size(); ++k)
            out.segment(soc_off[k], socs[k].dim()) = socs[k].h;
    }

    void mul_P(const VectorXd& x, VectorXd& out) const {
        if (pd.size() > 0)
            out = pd.cwiseProduct(x);
        else if (P.size() > 0)
            out = P * x;
        else
            out = VectorXd::Zero(nx);
    }
};

Canon canonicalize(const ConicProgram& prog) {
    Canon c;
    c.nx = prog.num_vars;
    c.pd = prog.p_diag;
    c.P = prog.p_dense;
    c.q = prog.q;
    c.rows = prog.rows;
    c.rhs = VectorXd::Zero(prog.rows.size());
    // normalize general rows to unit norm for conditioning
    for (size_t i = 0; i < prog.rows.size(); ++i) {
        const double nrm = std::sqrt(c.rows[i].squared_norm());
        const double sc = nrm > 1e-300 ? 1.0 / nrm : 1.0;
        c.rows[i].scale(sc);
        c.rhs[static_cast<int>(i)] = prog.row_rhs[i] * sc;
    }
    for (int i = 0; i < prog.num_vars; ++i) {
        if (prog.lb.size() > 0 && prog.lb[i] > -kInf) {
            c.bnd_var.push_back(i);
            c.bnd_sign.push_back(-1.0);
            c.bnd_val.conservativeResize(c.bnd_var.size());
            c.bnd_val[c.bnd_var.size() - 1] = -prog.lb[i];
        }
        if (prog.ub.size() > 0 && prog.ub[i] < kInf) {
            c.bnd_var.push_back(i);
            c.bnd_sign.push_back(1.0);
            c.bnd_val.conservativeResize(c.bnd_var.size());
            c.bnd_val[c.bnd_var.size() - 1] = prog.ub[i];
        }
    }
    for (const SocBlock& blk : prog.socs) {
        SocBlock s = blk;
        double mx = 0.0;
        for (const SparseRow& r : s.g) mx = std::max(mx, r.squared_norm());
        mx = std::sqrt(mx);
        if (mx < 1e-12) mx = std::max(1.0, s.h.cwiseAbs().maxCoeff());
        // one positive scalar per block keeps the cone membership unchanged
        const double sc = 1.0 / mx;
        for (SparseRow& r : s.g) r.scale(sc);
        s.h *= sc;
        c.socs.push_back(std::move(s));
    }
    c.finalize();
    return c;
}

// --- cone algebra over stacked vectors -------------------------------------

VectorXd cone_e(const Canon& c) {
    VectorXd e = VectorXd::Zero(c.cone_dim);
    e.head(c.l).setOnes();
    for (size_t k = 0; k < c.socs.size(); ++k) e[c.soc_off[k]] = 1.0;
    return e;
}

// u o v (Jordan product per cone block)
void jmul(const Canon& c, const VectorXd& u, const VectorXd& v, VectorXd& out) {
    out.resize(c.cone_dim);
    out.head(c.l) = u.head(c.l).cwiseProduct(v.head(c.l));
    for (size_t k = 0; k < c.socs.size(); ++k) {
        const int off = c.soc_off[k], d = c.socs[k].dim();
        const auto ub = u.segment(off, d);
        const auto vb = v.segment(off, d);
        out[off] = ub.dot(vb);
        out.segment(off + 1, d - 1) =
            ub[0] * vb.tail(d - 1) + vb[0] * ub.tail(d - 1);
    }
}

// x with lambda o x = u
void jdiv(const Canon& c, const VectorXd& lam, const VectorXd& u, VectorXd& out) {
    out.resize(c.cone_dim);
    out.head(c.l) = u.head(c.l).cwiseQuotient(lam.head(c.l));
    for (size_t k = 0; k < c.socs.size(); ++k) {
        const int off = c.soc_off[k], d = c.socs[k].dim();
        const auto lb = lam.segment(off, d);
        const auto ub = u.segment(off, d);
        const double det = lb[0] * lb[0] - lb.tail(d - 1).squaredNorm();
        const double x0 = (lb[0] * ub[0] - lb.tail(d - 1).dot(ub.tail(d - 1))) / det;
        out[off] = x0;
        out.segment(off + 1, d - 1) =
            (ub.tail(d - 1) - x0 * lb.tail(d - 1)) / lb[0];
    }
}

// largest step in [0, cap] keeping u + alpha*du in the cone
double max_step(const Canon& c, const VectorXd& u, const VectorXd& du,
                double cap) {
    double alpha = cap;
    for (int i = 0; i < c.l; ++i)
        if (du[i] < 0.0) alpha = std::min(alpha, -u[i] / du[i]);
    for (size_t k = 0; k < c.socs.size(); ++k) {
        const int off = c.soc_off[k], d = c.socs[k].dim();
        const auto ub = u.segment(off, d);
        const auto db = du.segment(off, d);
        const double a = db[0] * db[0] - db.tail(d - 1).squaredNorm();
        const double b = 2.0 * (ub[0] * db[0] - ub.tail(d - 1).dot(db.tail(d - 1)));
        const double cc = ub[0] * ub[0] - ub.tail(d - 1).squaredNorm();
        double lim = kInf;
        if (std::abs(a) < 1e-14 * (std::abs(b) + 1.0)) {
            if (b < 0.0) lim = -cc / b;
        } else {
            const double disc = b * b - 4.0 * a * cc;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                const double qq = -0.5 * (b + (b >= 0 ? sq : -sq));
                double r1 = qq / a;
                double r2 = (qq != 0.0) ? cc / qq : r1;
                if (r1 > r2) std::swap(r1, r2);
                if (r1 > 0.0)
                    lim = r1;
                else if (r2 > 0.0 && a < 0.0)
                    lim = r2;
            }
        }
        alpha = std::min(alpha, lim);
    }
    return alpha;
}

struct Scaling {
    VectorXd w2inv;  // orthant: z_i / s_i
    VectorXd w;      // orthant: sqrt(s_i / z_i)
    std::vector<double> eta;
    std::vector<VectorXd> v;  // unit hyperbolic scaling points
    VectorXd lambda;
};

bool compute_scaling(const Canon& c, const VectorXd& s, const VectorXd& z,
                     Scaling& sc) {
    sc.w2inv.resize(c.l);
    sc.w.resize(c.l);
    for (int i = 0; i < c.l; ++i) {
        if (s[i] <= 0.0 || z[i] <= 0.0) return false;
        sc.w2inv[i] = z[i] / s[i];
        sc.w[i] = std::sqrt(s[i] / z[i]);
    }
    sc.eta.assign(c.socs.size(), 0.0);
    sc.v.assign(c.socs.size(), VectorXd());
    sc.lambda.resize(c.cone_dim);
    for (int i = 0; i < c.l; ++i) sc.lambda[i] = std::sqrt(s[i] * z[i]);
    for (size_t k = 0; k < c.socs.size(); ++k) {
        const int off = c.soc_off[k], d = c.socs[k].dim();
        const auto sb = s.segment(off, d);
        const auto zb = z.segment(off, d);
        const double js = sb[0] * sb[0] - sb.tail(d - 1).squaredNorm();
        const double jz = zb[0] * zb[0] - zb.tail(d - 1).squaredNorm();
        if (js <= 0.0 || jz <= 0.0 || sb[0] <= 0.0 || zb[0] <= 0.0) return false;
        const double as = std::sqrt(js), az = std::sqrt(jz);
        const double gamma = std::sqrt((1.0 + sb.dot(zb) / (as * az)) / 2.0);
        VectorXd vk(d);
        vk[0] = sb[0] / as + zb[0] / az;
        vk.tail(d - 1) = sb.tail(d - 1) / as - zb.tail(d - 1) / az;
        vk /= 2.0 * gamma;
        sc.eta[k] = std::sqrt(as / az);
        // lambda = W z = eta (2 v (v'z) - J z)
        const double vz = vk.dot(zb);
        VectorXd lb(d);
        lb[0] = sc.eta[k] * (2.0 * vk[0] * vz - zb[0]);
        lb.tail(d - 1) =
            sc.eta[k] * (2.0 * vk.tail(d - 1) * vz + zb.tail(d - 1));
        sc.lambda.segment(off, d) = lb;
        sc.v[k] = std::move(vk);
    }
    return true;
}

// W u: orthant diag(w); SOC eta (2 v (v'u) - J u)
void apply_W(const Canon& c, const Scaling& sc, const VectorXd& u, VectorXd& out) {
    out.resize(c.cone_dim);
    out.head(c.l) = sc.w.cwiseProduct(u.head(c.l));
    for (size_t k = 0; k < c.socs.size(); ++k) {
        const int off = c.soc_off[k], d = c.socs[k].dim();
        const auto ub = u.segment(off, d);
        const VectorXd& v = sc.v[k];
        const double vu = v.dot(ub);
        out[off] = sc.eta[k] * (2.0 * v[0] * vu - ub[0]);
        out.segment(off + 1, d - 1) =
            sc.eta[k] * (2.0 * v.tail(d - 1) * vu + ub.tail(d - 1));
    }
}

// W^{-1} u = (1/eta) (2 Jv (v'Ju) - J u); W is symmetric so W^{-T} = W^{-1}
void apply_Winv(const Canon& c, const Scaling& sc, const VectorXd& u,
                VectorXd& out) {
    out.resize(c.cone_dim);
    out.head(c.l) = u.head(c.l).cwiseQuotient(sc.w.head(c.l));
    for (size_t k = 0; k < c.socs.size(); ++k) {
        const int off = c.soc_off[k], d = c.socs[k].dim();
        const auto ub = u.segment(off, d);
        const VectorXd& v = sc.v[k];
        const double vJu = v[0] * ub[0] - v.tail(d - 1).dot(ub.tail(d - 1));
        out[off] = (2.0 * v[0] * vJu - ub[0]) / sc.eta[k];
        out.segment(off + 1, d - 1) =
            (-2.0 * v.tail(d - 1) * vJu + ub.tail(d - 1)) / sc.eta[k];
    }
}

// --- KKT backends: solve (P + G' W^{-2} G) dx = r ---------------------------

class KktBackend {
public:
    virtual ~KktBackend() = default;
    virtual bool factor(const Scaling& sc) = 0;
    virtual VectorXd solve(const VectorXd& r) = 0;
};

class DenseKkt : public KktBackend {
public:
    explicit DenseKkt(const Canon& c) : c_(c) {}

    bool factor(const Scaling& sc) override {
        const int n = c_.nx;
        MatrixXd M = MatrixXd::Zero(n, n);
        if (c_.pd.size() > 0)
            M.diagonal() = c_.pd;
        else if (c_.P.size() > 0)
            M = c_.P;
        for (int i = 0; i < c_.n_gen; ++i)
            rank1(M, c_.rows[i], sc.w2inv[i]);
        for (int i = 0; i < c_.n_bnd; ++i) {
            const int v = c_.bnd_var[i];
            M(v, v) += sc.w2inv[c_.n_gen + i];
        }
        for (size_t k = 0; k < c_.socs.size(); ++k) {
            const SocBlock& blk = c_.socs[k];
            const VectorXd& v = sc.v[k];
            const double e2 = 1.0 / (sc.eta[k] * sc.eta[k]);
            const int d = blk.dim();
            for (int r = 0; r < d; ++r) rank1(M, blk.g[r], e2);
            // H^{-2} = I + 4(v'v)(Jv)(Jv)' - 2(Jv)v' - 2v(Jv)'
            VectorXd a = VectorXd::Zero(n), b = VectorXd::Zero(n);
            for (int r = 0; r < d; ++r) {
                const double jv = (r == 0) ? v[0] : -v[r];
                blk.g[r].scatter_add(a, jv);
                blk.g[r].scatter_add(b, v[r]);
            }
            const double t = v.squaredNorm();
            M.noalias() += (4.0 * t * e2) * (a * a.transpose());
            M.noalias() -= (2.0 * e2) * (a * b.transpose());
            M.noalias() -= (2.0 * e2) * (b * a.transpose());
        }
        double jitter = 0.0;
        const double base = std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
        for (int attempt = 0; attempt < 6; ++attempt) {
            llt_.compute(M + jitter * MatrixXd::Identity(n, n));
            if (llt_.info() == Eigen::Success) return true;
            jitter = (jitter == 0.0) ? 1e-12 * base : jitter * 100.0;
        }
        return false;
    }

    VectorXd solve(const VectorXd& r) override { return llt_.solve(r); }

private:
    static void rank1(MatrixXd& M, const SparseRow& row, double coef) {
        for (size_t a = 0; a < row.idx.size(); ++a)
            for (size_t b = 0; b < row.idx.size(); ++b)
                M(row.idx[a], row.idx[b]) += coef * row.val[a] * row.val[b];
    }
    const Canon& c_;
    Eigen::LLT<MatrixXd> llt_;
};

// Low-rank backend for large least-distance problems: requires diagonal (or
// zero) P and SOC tails whose rows are singletons. The KKT matrix is then
// D + U S U' with a small core, solved by the Woodbury identity with one
// refinement pass against the exact operator.
class WoodburyKkt : public KktBackend {
public:
    static bool compatible(const Canon& c) {
        if (c.P.size() > 0) return false;
        for (const SocBlock& blk : c.socs)
            for (int r = 1; r < blk.dim(); ++r)
                if (blk.g[r].idx.size() > 1) return false;
        return true;
    }

    explicit WoodburyKkt(const Canon& c) : c_(c) {}

    bool factor(const Scaling& sc) override {
        const int n = c_.nx;
        gen_coef_.resize(c_.n_gen);
        for (int i = 0; i < c_.n_gen; ++i) gen_coef_[i] = sc.w2inv[i];
        D_ = (c_.pd.size() > 0) ? c_.pd : VectorXd::Zero(n);
        for (int i = 0; i < c_.n_bnd; ++i)
            D_[c_.bnd_var[i]] += sc.w2inv[c_.n_gen + i];
        soc_.clear();
        for (size_t k = 0; k < c_.socs.size(); ++k) {
            const SocBlock& blk = c_.socs[k];
            const double e2 = 1.0 / (sc.eta[k] * sc.eta[k]);
            const int d = blk.dim();
            for (int r = 1; r < d; ++r)
                if (!blk.g[r].idx.empty())
                    D_[blk.g[r].idx[0]] += e2 * blk.g[r].val[0] * blk.g[r].val[0];
            SocPiece p;
            const VectorXd& v = sc.v[k];
            p.a = VectorXd::Zero(n);
            p.b = VectorXd::Zero(n);
            for (int r = 0; r < d; ++r) {
                const double jv = (r == 0) ? v[0] : -v[r];
                blk.g[r].scatter_add(p.a, jv);
                blk.g[r].scatter_add(p.b, v[r]);
            }
            p.g0 = VectorXd::Zero(n);
            blk.g[0].scatter_add(p.g0, 1.0);
            p.has_head = !blk.g[0].idx.empty();
            p.t = v.squaredNorm();
            p.e2 = e2;
            soc_.push_back(std::move(p));
        }
        if (D_.minCoeff() <= 0.0) return false;
        Dinv_ = D_.cwiseInverse();

        int kc = c_.n_gen;
        for (const auto& p : soc_) kc += p.has_head ? 3 : 2;
        U_.resize(n, kc);
        U_.setZero();
        MatrixXd Sinv = MatrixXd::Zero(kc, kc);
        for (int i = 0; i < c_.n_gen; ++i) {
            for (size_t t2 = 0; t2 < c_.rows[i].idx.size(); ++t2)
                U_(c_.rows[i].idx[t2], i) = c_.rows[i].val[t2];
            Sinv(i, i) = 1.0 / gen_coef_[i];
        }
        int col = c_.n_gen;
        for (const auto& p : soc_) {
            int ca = col, cb = col + 1;
            if (p.has_head) {
                Sinv(col, col) = 1.0 / p.e2;
                U_.col(col) = p.g0;
                ca = col + 1;
                cb = col + 2;
            }
            U_.col(ca) = p.a;
            U_.col(cb) = p.b;
            Sinv(ca, cb) = -0.5 / p.e2;
            Sinv(cb, ca) = -0.5 / p.e2;
            Sinv(cb, cb) = -p.t / p.e2;
            col += p.has_head ? 3 : 2;
        }
        MatrixXd C = Sinv;
        C.noalias() += U_.transpose() * Dinv_.asDiagonal() * U_;
        lu_.compute(C);
        return true;
    }

    VectorXd solve(const VectorXd& r) override {
        VectorXd x = solve_once(r);
        VectorXd res = r - apply_M(x);
        if (res.norm() > 1e-14 * std::max(1.0, r.norm())) x += solve_once(res);
        return x;
    }

private:
    struct SocPiece {
        VectorXd a, b, g0;
        double t = 0.0, e2 = 0.0;
        bool has_head = false;
    };

    VectorXd solve_once(const VectorXd& r) {
        VectorXd dr = Dinv_.cwiseProduct(r);
        VectorXd y = lu_.solve(U_.transpose() * dr);
        return dr - Dinv_.cwiseProduct(U_ * y);
    }

    VectorXd apply_M(const VectorXd& x) const {
        VectorXd out = D_.cwiseProduct(x);
        for (int i = 0; i < c_.n_gen; ++i) {
            const double ax = c_.rows[i].dot(x);
            c_.rows[i].scatter_add(out, gen_coef_[i] * ax);
        }
        for (const auto& p : soc_) {
            if (p.has_head) out += p.e2 * p.g0.dot(x) * p.g0;
            const double ax = p.a.dot(x), bx = p.b.dot(x);
            out += p.e2 * (4.0 * p.t * ax) * p.a;
            out -= p.e2 * 2.0 * (ax * p.b + bx * p.a);
        }
        return out;
    }

    const Canon& c_;
    VectorXd D_, Dinv_;
    std::vector<double> gen_coef_;
    std::vector<SocPiece> soc_;
    MatrixXd U_;
    Eigen::PartialPivLU<MatrixXd> lu_;
};

struct IpmResult {
    SolveStatus status = SolveStatus::NumericalFailure;
    VectorXd x;
    int iterations = 0;
};

IpmResult ipm_solve(const Canon& c, const SolverSettings& st,
                    const VectorXd* x_init) {
    IpmResult res;
    const int nx = c.nx;

    if (c.cone_dim == 0) {
        // unconstrained QP
        if (c.pd.size() > 0) {
            if (c.pd.minCoeff() <= 0.0) {
                res.status = SolveStatus::Unbounded;
                return res;
            }
            res.x = -c.q.cwiseQuotient(c.pd);
        } else if (c.P.size() > 0) {
            Eigen::LLT<MatrixXd> llt(c.P);
            if (llt.info() != Eigen::Success) {
                res.status = SolveStatus::Unbounded;
                return res;
            }
            res.x = llt.solve(-c.q);
        } else {
            if (c.q.norm() > 0) {
                res.status = SolveStatus::Unbounded;
                return res;
            }
            res.x = VectorXd::Zero(nx);
        }
        res.status = SolveStatus::Optimal;
        return res;
    }

    std::unique_ptr<KktBackend> kkt;
    if (nx > 300 && WoodburyKkt::compatible(c))
        kkt = std::make_unique<WoodburyKkt>(c);
    else
        kkt = std::make_unique<DenseKkt>(c);

    VectorXd h;
    c.get_h(h);
    const VectorXd e = cone_e(c);

    // initialization: x from a W=I KKT solve (or the caller's start), then
    // shift s = h - Gx and z = -s into the cone interior
    Scaling sc;
    if (!compute_scaling(c, e, e, sc)) return res;
    if (!kkt->factor(sc)) return res;

    VectorXd x;
    if (x_init && x_init->size() == nx) {
        x = *x_init;
    } else {
        VectorXd gth;
        c.mul_Gt(h, gth);
        x = kkt->solve(-c.q + gth);
    }
    VectorXd gx(c.cone_dim);
    c.mul_G(x, gx);
    VectorXd s = h - gx;
    VectorXd z = -s;
    auto push_interior = [&](VectorXd& u) {
        double shift = 0.0;
        for (int i = 0; i < c.l; ++i) shift = std::max(shift, -u[i]);
        for (size_t k = 0; k < c.socs.size(); ++k) {
            const int off = c.soc_off[k], d = c.socs[k].dim();
            const double m = u[off] - u.segment(off + 1, d - 1).norm();
            shift = std::max(shift, -m);
        }
        if (shift > 0.0) u += (shift + 1.0) * e;
        // ensure strict interior even when the start is exactly feasible
        double m2 = kInf;
        for (int i = 0; i < c.l; ++i) m2 = std::min(m2, u[i]);
        for (size_t k = 0; k < c.socs.size(); ++k) {
            const int off = c.soc_off[k], d = c.socs[k].dim();
            m2 = std::min(m2, u[off] - u.segment(off + 1, d - 1).norm());
        }
        if (m2 < 1e-4) u += (1e-4 - m2 + 0.1) * e;
    };
    push_interior(s);
    push_interior(z);

    double best_metric = kInf;
    int stall = 0;

    VectorXd rx(nx), rz(c.cone_dim);
    VectorXd px(nx), gtz(nx);
    for (int iter = 0; iter < st.max_iter; ++iter) {
        res.iterations = iter;
        c.mul_P(x, px);
        c.mul_Gt(z, gtz);
        rx = px + c.q + gtz;
        c.mul_G(x, gx);
        rz = gx + s - h;
        const double gap = s.dot(z);
        const double obj = 0.5 * x.dot(px) + c.q.dot(x);
        const double pres = rz.norm() / c.hnorm;
        const double dres = rx.norm() / c.qnorm;
        const double grel = gap / std::max(1.0, std::abs(obj));
        const double metric = std::max({pres, dres, grel});

        if (pres <= st.tol && dres <= st.tol && grel <= st.tol) {
            res.status = SolveStatus::Optimal;
            res.x = x;
            return res;
        }
        if (x.lpNorm<Eigen::Infinity>() > 1e13 || obj < -1e14) {
            res.status = SolveStatus::Unbounded;
            res.x = x;
            return res;
        }
        if (metric < best_metric * 0.9) {
            best_metric = metric;
            stall = 0;
        } else if (++stall > 25) {
            break;
        }

        if (!compute_scaling(c, s, z, sc)) break;
        if (!kkt->factor(sc)) break;

        const double mu = gap / c.degree;
        auto newton = [&](const VectorXd& dcone, VectorXd& dx, VectorXd& dz,
                          VectorXd& ds) {
            VectorXd ld, wld;
            jdiv(c, sc.lambda, dcone, ld);
            apply_W(c, sc, ld, wld);
            VectorXd r2 = -rz - wld;
            VectorXd wr2(c.cone_dim), w2r2(c.cone_dim);
            apply_Winv(c, sc, r2, wr2);
            apply_Winv(c, sc, wr2, w2r2);
            VectorXd rhs(nx);
            c.mul_Gt(w2r2, rhs);
            rhs = -rx + rhs;
            dx = kkt->solve(rhs);
            VectorXd gdx(c.cone_dim);
            c.mul_G(dx, gdx);
            VectorXd tmp = gdx - r2;
            VectorXd t1(c.cone_dim);
            apply_Winv(c, sc, tmp, t1);
            apply_Winv(c, sc, t1, dz);
            ds = -rz - gdx;
        };

        // predictor
        VectorXd dcone(c.cone_dim), lam2(c.cone_dim);
        jmul(c, sc.lambda, sc.lambda, lam2);
        dcone = -lam2;
        VectorXd dxa, dza, dsa;
        newton(dcone, dxa, dza, dsa);
        double alpha_aff = std::min(max_step(c, s, dsa, 1.0),
                                    max_step(c, z, dza, 1.0));
        const double mu_aff =
            (s + alpha_aff * dsa).dot(z + alpha_aff * dza) / c.degree;
        double sigma = std::pow(std::max(0.0, std::min(1.0, mu_aff / mu)), 3);

        // corrector
        VectorXd wds(c.cone_dim), wdz(c.cone_dim), corr(c.cone_dim);
        apply_Winv(c, sc, dsa, wds);
        apply_W(c, sc, dza, wdz);
        jmul(c, wds, wdz, corr);
        dcone = -lam2 - corr + (sigma * mu) * e;
        VectorXd dx, dz, ds;
        newton(dcone, dx, dz, ds);

        double alpha = 0.99 * std::min(max_step(c, s, ds, 1.0 / 0.99),
                                       max_step(c, z, dz, 1.0 / 0.99));
        alpha = std::min(alpha, 1.0);
        if (alpha < 1e-11) break;
        x += alpha * dx;
        s += alpha * ds;
        z += alpha * dz;
    }

    res.x = x;
    res.status = SolveStatus::NumericalFailure;
    return res;
}

// phase-1: minimize the common slack sigma added to every row / SOC head
Canon phase1_of(const Canon& c, double reg) {
    Canon p;
    p.nx = c.nx + 1;
    p.pd = VectorXd::Constant(p.nx, reg);
    p.pd[c.nx] = reg;
    p.q = VectorXd::Zero(p.nx);
    p.q[c.nx] = 1.0;
    p.rows = c.rows;
    p.rhs = c.rhs;
    for (SparseRow& r : p.rows) r.add(c.nx, -1.0);
    p.bnd_var = c.bnd_var;
    p.bnd_val = c.bnd_val;
    p.bnd_sign = c.bnd_sign;
    // sigma >= -1
    p.bnd_var.push_back(c.nx);
    p.bnd_sign.push_back(-1.0);
    p.bnd_val.conservativeResize(p.bnd_var.size());
    p.bnd_val[p.bnd_var.size() - 1] = 1.0;
    p.socs = c.socs;
    for (SocBlock& blk : p.socs) blk.g[0].add(c.nx, -1.0);
    p.finalize();
    return p;
}

}  // namespace

SolverReport solve(const ConicProgram& prog, const SolverSettings& settings) {
    const auto tstart = std::chrono::steady_clock::now();
    SolverReport rep;
    if (prog.num_vars <= 0) throw DimensionMismatch("solver: no variables");
    if (prog.lb.size() > 0 && prog.ub.size() > 0)
        for (int i = 0; i < prog.num_vars; ++i)
            if (prog.lb[i] > prog.ub[i]) {
                rep.status = SolveStatus::Infeasible;
                return rep;
            }

    ConicProgram work = prog;
    work.psd.reset();

    for (int round = 0; round < 60; ++round) {
        Canon c = canonicalize(work);

        bool feasibility_known = settings.skip_phase1;
        if (!feasibility_known && settings.warm_start &&
            settings.warm_start->size() == prog.num_vars &&
            work.max_violation(*settings.warm_start) <= 1e-9)
            feasibility_known = true;
        if (!feasibility_known && c.n_gen == 0 && c.socs.empty())
            feasibility_known = true;  // bounds alone, already validated

        if (!feasibility_known) {
            Canon p1 = phase1_of(c, 1e-12);
            SolverSettings s1 = settings;
            s1.tol = std::min(1e-8, settings.tol);
            IpmResult r1 = ipm_solve(p1, s1, nullptr);
            if (r1.status != SolveStatus::Optimal) {
                rep.status = SolveStatus::NumericalFailure;
                rep.iterations += r1.iterations;
                return rep;
            }
            rep.iterations += r1.iterations;
            const double sigma = r1.x[c.nx];
            if (sigma > 1e-7) {
                rep.status = SolveStatus::Infeasible;
                return rep;
            }
        }

        VectorXd x0;
        const VectorXd* x0p = nullptr;
        if (settings.warm_start && settings.warm_start->size() == prog.num_vars) {
            x0 = *settings.warm_start;
            x0p = &x0;
        }
        IpmResult r2 = ipm_solve(c, settings, x0p);
        rep.iterations += r2.iterations;
        if (r2.status != SolveStatus::Optimal) {
            rep.status = r2.status;
            rep.x = r2.x;
            if (r2.x.size() == prog.num_vars) {
                rep.objective = prog.objective(r2.x);
                rep.max_primal_residual = prog.max_violation(r2.x);
            }
            break;
        }

        if (prog.psd) {
            VectorXd vec;
            const double lmin = psd_min_eig(*prog.psd, r2.x, &vec);
            if (lmin < -1e-8) {
                // cut v'Xv >= 0, linear in the triangle coordinates
                SparseRow cut;
                int k = 0;
                for (int i = 0; i < prog.psd->n; ++i)
                    for (int j = i; j < prog.psd->n; ++j) {
                        const double coef =
                            (i == j) ? vec[i] * vec[i] : 2.0 * vec[i] * vec[j];
                        cut.add(prog.psd->var_index[k++], -coef);
                    }
                work.add_row(cut, 0.0);
                continue;
            }
        }

        rep.status = SolveStatus::Optimal;
        rep.x = r2.x;
        rep.objective = prog.objective(r2.x);
        rep.max_primal_residual = prog.max_violation(r2.x);
        break;
    }

    rep.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - tstart)
            .count();
    return rep;
}

// --- KKT audit ---------------------------------------------------------------

KktResiduals kkt_residuals(const ConicProgram& prog, const VectorXd& x,
                           double active_tol) {
    if (x.size() != prog.num_vars)
        throw DimensionMismatch("kkt_residuals: solution size mismatch");
    KktResiduals out;
    out.primal = std::max(0.0, prog.max_violation(x));

    // gradient of the objective
    VectorXd grad = prog.q;
    if (prog.p_diag.size() > 0)
        grad += prog.p_diag.cwiseProduct(x);
    else if (prog.p_dense.size() > 0)
        grad += prog.p_dense * x;

    // collect normals of active constraints (slack within active_tol, or
    // violated)
    std::vector<VectorXd> normals;
    std::vector<double> slacks;
    auto push = [&](const VectorXd& nrm, double slack) {
        normals.push_back(nrm);
        slacks.push_back(std::max(0.0, slack));
    };
    for (size_t i = 0; i < prog.rows.size(); ++i) {
        const double slack = prog.row_rhs[i] - prog.rows[i].dot(x);
        if (slack <= active_tol) {
            VectorXd nv = VectorXd::Zero(prog.num_vars);
            prog.rows[i].scatter_add(nv, 1.0);
            push(nv, slack);
        }
    }
    for (int i = 0; i < prog.num_vars; ++i) {
        if (prog.lb.size() > 0 && prog.lb[i] > -kInf &&
            x[i] - prog.lb[i] <= active_tol)
            push(-VectorXd::Unit(prog.num_vars, i), x[i] - prog.lb[i]);
        if (prog.ub.size() > 0 && prog.ub[i] < kInf &&
            prog.ub[i] - x[i] <= active_tol)
            push(VectorXd::Unit(prog.num_vars, i), prog.ub[i] - x[i]);
    }
    for (const SocBlock& cblk : prog.socs) {
        const int d = cblk.dim();
        double head = cblk.h[0] - cblk.g[0].dot(x);
        VectorXd tail(d - 1);
        for (int r = 1; r < d; ++r) tail[r - 1] = cblk.h[r] - cblk.g[r].dot(x);
        const double tn = tail.norm();
        const double slack = head - tn;
        if (slack <= active_tol && tn > 1e-12) {
            VectorXd nv = VectorXd::Zero(prog.num_vars);
            cblk.g[0].scatter_add(nv, 1.0);  // -grad of head
            for (int r = 1; r < d; ++r)
                cblk.g[r].scatter_add(nv, -tail[r - 1] / tn);
            push(nv, slack);
        }
    }
    if (prog.psd) {
        VectorXd vec;
        const double lmin = psd_min_eig(*prog.psd, x, &vec);
        if (lmin <= active_tol) {
            SparseRow cut;
            int k = 0;
            for (int i = 0; i < prog.psd->n; ++i)
                for (int j = i; j < prog.psd->n; ++j) {
                    const double coef =
                        (i == j) ? vec[i] * vec[i] : 2.0 * vec[i] * vec[j];
                    cut.add(prog.psd->var_index[k++], -coef);
                }
            VectorXd nv = VectorXd::Zero(prog.num_vars);
            cut.scatter_add(nv, 1.0);
            push(nv, lmin);
        }
    }

    if (normals.empty()) {
        out.stationarity = grad.norm();
        out.complementarity = 0.0;
        return out;
    }

    // nonnegative least squares: min || grad + N lambda ||, lambda >= 0,
    // by projected gradient (audit-grade accuracy is sufficient)
    const int k = static_cast<int>(normals.size());
    MatrixXd N(prog.num_vars, k);
    for (int j = 0; j < k; ++j) N.col(j) = normals[j];
    MatrixXd NtN = N.transpose() * N;
    VectorXd Ntg = N.transpose() * grad;
    double lip = NtN.trace() + 1e-12;
    VectorXd lam = VectorXd::Zero(k);
    for (int it = 0; it < 2000; ++it) {
        VectorXd g = NtN * lam + Ntg;
        lam = (lam - g / lip).cwiseMax(0.0);
    }
    out.stationarity = (grad + N * lam).norm();
    out.complementarity = 0.0;
    for (int j = 0; j < k; ++j) out.complementarity += lam[j] * slacks[j];
    return out;
}

}  // namespace gridchase
