#include "smbound/predictor.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace smbound {

const char* to_string(Method m) {
    switch (m) {
        case Method::MethodI: return "method_i";
        case Method::MethodII: return "method_ii";
        case Method::PEM: return "pem";
        case Method::SEM: return "sem";
    }
    return "unknown";
}

Method method_from_string(const std::string& s) {
    if (s == "method_i" || s == "I" || s == "MethodI" || s == "method1") return Method::MethodI;
    if (s == "method_ii" || s == "II" || s == "MethodII" || s == "method2") return Method::MethodII;
    if (s == "pem" || s == "PEM") return Method::PEM;
    if (s == "sem" || s == "SEM") return Method::SEM;
    throw std::invalid_argument("unknown method '" + s + "'");
}

HorizonMaps arx_horizon_maps(const Vector& theta1, int o, int m, int P, bool with_jacobian) {
    const Index n1 = o + static_cast<Index>(m) * o;
    if (theta1.size() != n1) throw std::invalid_argument("arx_horizon_maps: theta1 has wrong length");
    HorizonMaps out;
    out.theta.reserve(static_cast<std::size_t>(P));
    if (with_jacobian) out.jac.reserve(static_cast<std::size_t>(P));
    for (int p = 1; p <= P; ++p) {
        const Index dim = regressor_dim(Flavor::Arx, o, m, p);
        Vector th = Vector::Zero(dim);
        Matrix J;
        if (with_jacobian) J = Matrix::Zero(dim, n1);
        // predicted outputs fed back: a_l * theta_{p-l}, with inputs shifted l slots later
        for (int l = 1; l <= std::min(p - 1, o); ++l) {
            const double a = theta1(l - 1);
            const Vector& prev = out.theta[static_cast<std::size_t>(p - l - 1)];
            const Index nu = prev.size() - o;
            const Index off = o + static_cast<Index>(l) * m;
            th.head(o) += a * prev.head(o);
            th.segment(off, nu) += a * prev.tail(nu);
            if (with_jacobian) {
                const Matrix& Jp = out.jac[static_cast<std::size_t>(p - l - 1)];
                J.topRows(o) += a * Jp.topRows(o);
                J.middleRows(off, nu) += a * Jp.bottomRows(nu);
                J.col(l - 1).head(o) += prev.head(o);
                J.col(l - 1).segment(off, nu) += prev.tail(nu);
            }
        }
        // measured outputs still inside the window
        for (int l = p; l <= o; ++l) {
            th(l - p) += theta1(l - 1);
            if (with_jacobian) J(l - p, l - 1) += 1.0;
        }
        // direct input taps u(k+p-1-l)
        for (int l = 0; l < o; ++l) {
            const Index off = o + static_cast<Index>(l) * m;
            th.segment(off, m) += theta1.segment(off, m);
            if (with_jacobian) J.block(off, off, m, m) += Matrix::Identity(m, m);
        }
        out.theta.push_back(std::move(th));
        if (with_jacobian) out.jac.push_back(std::move(J));
    }
    return out;
}

ParameterVector iterate_predictor(const ParameterVector& theta1, int p) {
    if (theta1.p != 1) throw std::invalid_argument("iterate_predictor: expected a one-step vector");
    if (theta1.flavor != Flavor::Arx)
        throw std::invalid_argument("iterate_predictor: state-space maps need the full (A, B); use ss_horizon_maps");
    HorizonMaps h = arx_horizon_maps(theta1.theta, theta1.o, theta1.m, p, false);
    ParameterVector out = theta1;
    out.p = p;
    out.theta = h.theta.back();
    return out;
}

Matrix jacobian_h(const ParameterVector& theta1, int p) {
    HorizonMaps h = arx_horizon_maps(theta1.theta, theta1.o, theta1.m, p, true);
    return h.jac.back();
}

HorizonMaps ss_horizon_maps(const Matrix& A, const Matrix& B, int i, int P, bool with_jacobian) {
    const Index n = A.rows(), m = B.cols();
    const Index stride = n + m, npar = n * stride;
    std::vector<Vector> r(static_cast<std::size_t>(P + 1));
    std::vector<Matrix> D;
    r[0] = Vector::Unit(n, i);
    if (with_jacobian) D.assign(static_cast<std::size_t>(P + 1), Matrix::Zero(n, npar));
    for (int s = 1; s <= P; ++s) {
        const Vector& prev = r[static_cast<std::size_t>(s - 1)];
        r[s] = A.transpose() * prev;
        if (with_jacobian) {
            Matrix& Ds = D[static_cast<std::size_t>(s)];
            Ds.noalias() = A.transpose() * D[static_cast<std::size_t>(s - 1)];
            for (Index j = 0; j < n; ++j)
                for (Index k = 0; k < n; ++k) Ds(k, j * stride + k) += prev(j);
        }
    }
    HorizonMaps out;
    for (int p = 1; p <= P; ++p) {
        const Index dim = n + m * p;
        Vector th(dim);
        th.head(n) = r[static_cast<std::size_t>(p)];
        for (int s = 0; s < p; ++s) th.segment(n + s * m, m) = B.transpose() * r[static_cast<std::size_t>(p - 1 - s)];
        out.theta.push_back(std::move(th));
        if (with_jacobian) {
            Matrix J(dim, npar);
            J.topRows(n) = D[static_cast<std::size_t>(p)];
            for (int s = 0; s < p; ++s) {
                const std::size_t e = static_cast<std::size_t>(p - 1 - s);
                auto blk = J.middleRows(n + s * m, m);
                blk.noalias() = B.transpose() * D[e];
                for (Index j = 0; j < n; ++j)
                    for (Index k = 0; k < m; ++k) blk(k, j * stride + n + k) += r[e](j);
            }
            out.jac.push_back(std::move(J));
        }
    }
    return out;
}

void assemble_state_space(const std::vector<Vector>& theta1, int n, Matrix& A, Matrix& B) {
    if (static_cast<int>(theta1.size()) != n) throw std::invalid_argument("assemble_state_space: need n channel models");
    const Index m = theta1.front().size() - n;
    A.resize(n, n);
    B.resize(n, m);
    for (int i = 0; i < n; ++i) {
        if (theta1[i].size() != n + m) throw std::invalid_argument("assemble_state_space: inconsistent lengths");
        A.row(i) = theta1[i].head(n).transpose();
        B.row(i) = theta1[i].tail(m).transpose();
    }
}

std::vector<Vector> split_state_space(const Matrix& A, const Matrix& B) {
    std::vector<Vector> out;
    for (Index i = 0; i < A.rows(); ++i) {
        Vector t(A.cols() + B.cols());
        t << A.row(i).transpose(), B.row(i).transpose();
        out.push_back(t);
    }
    return out;
}

Matrix IdentifiedModel::A_hat() const {
    Matrix A, B;
    assemble_state_space(theta1, o, A, B);
    return A;
}

Matrix IdentifiedModel::B_hat() const {
    Matrix A, B;
    assemble_state_space(theta1, o, A, B);
    return B;
}

HorizonMaps model_horizon_maps(const IdentifiedModel& model, int i, int P, bool with_jacobian) {
    if (model.flavor == Flavor::Arx) return arx_horizon_maps(model.theta1[i], model.o, model.m, P, with_jacobian);
    Matrix A, B;
    assemble_state_space(model.theta1, model.o, A, B);
    return ss_horizon_maps(A, B, i, P, with_jacobian);
}

Vector model_theta_p(const IdentifiedModel& model, int i, int p) { return model_horizon_maps(model, i, p, false).theta.back(); }

Vector simulate_model(const IdentifiedModel& model, const Dataset& ds, int i, Index start_k, int P) {
    const Index T = ds.T();
    if (start_k + P > T - 1 + 1 || start_k < 0) throw std::out_of_range("simulate_model: horizon runs past the data");
    Vector out(P);
    if (model.flavor == Flavor::Arx) {
        const int o = model.o, m = model.m;
        if (start_k - o + 1 < 0) throw std::out_of_range("simulate_model: not enough past samples");
        const Vector& th = model.theta1[i];
        std::vector<double> buf(static_cast<std::size_t>(o + P));
        for (int l = 0; l < o; ++l) buf[static_cast<std::size_t>(l)] = ds.y(start_k - o + 1 + l, i);
        for (int s = 1; s <= P; ++s) {
            const Index t = start_k + s;
            double z = 0.0;
            for (int l = 1; l <= o; ++l) z += th(l - 1) * buf[static_cast<std::size_t>(o - 1 + s - l)];
            for (int l = 0; l < o; ++l)
                for (int j = 0; j < m; ++j) {
                    const Index tu = t - 1 - l;
                    if (tu >= 0) z += th(o + l * m + j) * ds.u(tu, j);
                }
            buf[static_cast<std::size_t>(o - 1 + s)] = z;
            out(s - 1) = z;
        }
        return out;
    }
    Matrix A, B;
    assemble_state_space(model.theta1, model.o, A, B);
    Vector x = ds.y.row(start_k).transpose();
    for (int s = 1; s <= P; ++s) {
        x = A * x + B * ds.u.row(start_k + s - 1).transpose();
        out(s - 1) = x(i);
    }
    return out;
}

Matrix simulate_portion(const IdentifiedModel& model, const Dataset& ds, Portion portion) {
    const Index b = ds.begin(portion), e = ds.end(portion);
    const Index len = e - b;
    Matrix out = ds.y.middleRows(b, len);
    if (model.flavor == Flavor::Arx) {
        const int o = model.o, m = model.m;
        for (int i = 0; i < model.q; ++i) {
            const Vector& th = model.theta1[i];
            for (Index t = o; t < len; ++t) {
                double z = 0.0;
                for (int l = 1; l <= o; ++l) z += th(l - 1) * out(t - l, i);
                for (int l = 0; l < o; ++l)
                    for (int j = 0; j < m; ++j) z += th(o + l * m + j) * ds.u(b + t - 1 - l, j);
                out(t, i) = z;
            }
        }
        return out;
    }
    Matrix A, B;
    assemble_state_space(model.theta1, model.o, A, B);
    Vector x = ds.y.row(b).transpose();
    for (Index t = 1; t < len; ++t) {
        x = A * x + B * ds.u.row(b + t - 1).transpose();
        out.row(t) = x.transpose();
    }
    return out;
}

Matrix companion(const Vector& theta_z) {
    const Index o = theta_z.size();
    Matrix C = Matrix::Zero(o, o);
    C.row(0) = theta_z.transpose();
    if (o > 1) C.bottomLeftCorner(o - 1, o - 1).setIdentity();
    return C;
}

double spectral_radius(const Matrix& M) {
    if (M.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(M, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

StabilityCertificate check_boxes(const HorizonMaps& maps, const DecayEnvelope& env, Flavor flavor, int o, int m,
                                 int p_bar, double chi, double tol) {
    StabilityCertificate c;
    c.p_bar = p_bar;
    c.chi = chi;
    for (int p = 2; p <= p_bar; ++p) {
        const Vector& th = maps.theta[static_cast<std::size_t>(p - 1)];
        const Vector box = decay_box(env, flavor, o, m, p);
        for (Index l = 0; l < th.size(); ++l) {
            if (std::abs(th(l)) > box(l) * (1.0 + tol) + tol) {
                c.fail_p = p;
                c.fail_index = l;
                c.reason = "decay box violated at p=" + std::to_string(p) + ", entry " + std::to_string(l);
                return c;
            }
        }
    }
    if (!(chi < 1.0)) {
        c.reason = "convergence factor chi=" + std::to_string(chi) + " is not below 1; increase p_bar";
        return c;
    }
    c.certified = true;
    return c;
}

}  // namespace

StabilityCertificate certify_stability(const Vector& theta1, const DecayEnvelope& env, int o, int m, int p_bar,
                                       double tol) {
    HorizonMaps maps = arx_horizon_maps(theta1, o, m, std::max(1, p_bar), false);
    const double chi = o * env.L_hat * std::pow(env.rho_hat, p_bar + 1);
    StabilityCertificate c = check_boxes(maps, env, Flavor::Arx, o, m, p_bar, chi, tol);
    c.spectral_radius = spectral_radius(companion(theta1.head(o)));
    return c;
}

StabilityCertificate certify_stability_ss(const Matrix& A, const Matrix& B, int i, const DecayEnvelope& env,
                                          int p_bar, double tol) {
    HorizonMaps maps = ss_horizon_maps(A, B, i, std::max(1, p_bar), false);
    const double chi = env.L_hat * std::pow(env.rho_hat, p_bar + 1);
    StabilityCertificate c = check_boxes(maps, env, Flavor::StateSpace, static_cast<int>(A.rows()),
                                         static_cast<int>(B.cols()), p_bar, chi, tol);
    c.spectral_radius = spectral_radius(A);
    return c;
}

}  // namespace smbound
