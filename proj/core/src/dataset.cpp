#include "smbound/dataset.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace smbound {

const char* to_string(Flavor f) { return f == Flavor::Arx ? "arx" : "state_space"; }

Flavor flavor_from_string(const std::string& s) {
    if (s == "arx" || s == "ARX") return Flavor::Arx;
    if (s == "state_space" || s == "ss" || s == "StateSpace") return Flavor::StateSpace;
    throw std::invalid_argument("unknown flavor '" + s + "'");
}

Index regressor_dim(Flavor f, int o, int m, int p) {
    if (f == Flavor::Arx) return o + static_cast<Index>(m) * (o + p - 1);
    return o + static_cast<Index>(m) * p;
}

Index split_index_for(Index T, double fraction) {
    Index s = static_cast<Index>(std::llround(fraction * static_cast<double>(T)));
    return std::clamp<Index>(s, 1, std::max<Index>(1, T - 1));
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
        } else if (ch == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        auto b = s.find_first_not_of(" \t");
        auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return out;
}

std::vector<int> find_columns(const std::vector<std::string>& header, const std::vector<std::string>& names,
                              char prefix) {
    std::vector<int> idx;
    if (!names.empty()) {
        for (const auto& n : names) {
            auto it = std::find(header.begin(), header.end(), n);
            if (it == header.end()) throw std::runtime_error("csv: missing column '" + n + "'");
            idx.push_back(static_cast<int>(it - header.begin()));
        }
        return idx;
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto& h = header[c];
        if (h.size() >= 2 && h[0] == prefix && std::isdigit(static_cast<unsigned char>(h[1])))
            idx.push_back(static_cast<int>(c));
    }
    return idx;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvOptions& opts) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("csv: empty file '" + path + "'");
    const auto header = split_line(line);
    const auto ucol = find_columns(header, opts.inputs, 'u');
    const auto ycol = find_columns(header, opts.outputs, 'y');
    const auto zcol = find_columns(header, opts.truth, 'z');
    if (ucol.empty() || ycol.empty()) throw std::runtime_error("csv: need at least one u and one y column");

    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = split_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("csv: ragged row " + std::to_string(lineno) + " has " +
                                     std::to_string(cells.size()) + " cells, header has " +
                                     std::to_string(header.size()));
        std::vector<double> vals(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const char* s = cells[c].c_str();
            char* endp = nullptr;
            errno = 0;
            double v = std::strtod(s, &endp);
            if (cells[c].empty() || endp == s || *endp != '\0' || errno == ERANGE || !std::isfinite(v))
                throw std::runtime_error("csv: non-numeric value '" + cells[c] + "' at row " +
                                         std::to_string(lineno) + ", column '" + header[c] + "'");
            vals[c] = v;
        }
        rows.push_back(std::move(vals));
    }
    if (rows.size() < 2) throw std::runtime_error("csv: need at least 2 data rows");

    Dataset ds;
    const Index T = static_cast<Index>(rows.size());
    ds.u.resize(T, static_cast<Index>(ucol.size()));
    ds.y.resize(T, static_cast<Index>(ycol.size()));
    if (zcol.size() == ycol.size()) ds.z.resize(T, static_cast<Index>(zcol.size()));
    for (Index t = 0; t < T; ++t) {
        for (std::size_t c = 0; c < ucol.size(); ++c) ds.u(t, c) = rows[t][ucol[c]];
        for (std::size_t c = 0; c < ycol.size(); ++c) ds.y(t, c) = rows[t][ycol[c]];
        if (ds.z.size() > 0)
            for (std::size_t c = 0; c < zcol.size(); ++c) ds.z(t, c) = rows[t][zcol[c]];
    }
    ds.ts = opts.ts;
    ds.split_index = split_index_for(T, opts.split_fraction);
    return ds;
}

void save_csv(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("csv: cannot write '" + path + "'");
    out << std::setprecision(17);
    bool first = true;
    auto sep = [&] {
        if (!first) out << ',';
        first = false;
    };
    for (Index j = 0; j < ds.m(); ++j) { sep(); out << 'u' << j + 1; }
    for (Index j = 0; j < ds.q(); ++j) { sep(); out << 'y' << j + 1; }
    if (ds.has_truth())
        for (Index j = 0; j < ds.q(); ++j) { sep(); out << 'z' << j + 1; }
    out << '\n';
    for (Index t = 0; t < ds.T(); ++t) {
        first = true;
        for (Index j = 0; j < ds.m(); ++j) { sep(); out << ds.u(t, j); }
        for (Index j = 0; j < ds.q(); ++j) { sep(); out << ds.y(t, j); }
        if (ds.has_truth())
            for (Index j = 0; j < ds.q(); ++j) { sep(); out << ds.z(t, j); }
        out << '\n';
    }
}

Dataset simulate_lti(const LtiSystem& sys, const Matrix& u, const Vector& noise, std::uint64_t seed,
                     double ts, double split_fraction) {
    const Index n = sys.A.rows();
    if (sys.A.cols() != n || sys.B.rows() != n || sys.C.cols() != n || sys.B.cols() != u.cols())
        throw std::invalid_argument("simulate_lti: dimension mismatch");
    if (noise.size() != sys.C.rows()) throw std::invalid_argument("simulate_lti: noise has wrong length");
    if ((noise.array() < 0).any()) throw std::invalid_argument("simulate_lti: negative noise amplitude");
    if (sys.x0.size() != 0 && sys.x0.size() != n) throw std::invalid_argument("simulate_lti: x0 has wrong length");

    const Index T = u.rows();
    const Index q = sys.C.rows();
    Dataset ds;
    ds.u = u;
    ds.z.resize(T, q);
    ds.y.resize(T, q);
    Vector x = sys.x0.size() == n ? sys.x0 : Vector::Zero(n);
    for (Index k = 0; k < T; ++k) {
        ds.z.row(k) = (sys.C * x).transpose();
        x = sys.A * x + sys.B * u.row(k).transpose();
    }
    std::mt19937_64 eng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (Index k = 0; k < T; ++k)
        for (Index i = 0; i < q; ++i) ds.y(k, i) = ds.z(k, i) + noise(i) * unit(eng);
    ds.ts = ts;
    ds.split_index = split_index_for(T, split_fraction);
    return ds;
}

Matrix random_step_input(Index T, const std::vector<double>& values, Index hold, std::uint64_t seed, Index m) {
    if (hold < 1 || values.empty()) throw std::invalid_argument("random_step_input: need hold >= 1 and values");
    std::mt19937_64 eng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    Matrix u(T, m);
    for (Index j = 0; j < m; ++j) {
        double v = 0.0;
        for (Index k = 0; k < T; ++k) {
            if (k % hold == 0) v = values[pick(eng)];
            u(k, j) = v;
        }
    }
    return u;
}

RegressorTable build_regressors(const Dataset& ds, Flavor flavor, int i, int p, int o, Portion portion,
                                int stride) {
    if (p < 1 || o < 1 || stride < 1) throw std::invalid_argument("build_regressors: p, o, stride must be >= 1");
    if (i < 0 || i >= ds.q()) throw std::invalid_argument("build_regressors: channel out of range");
    const Index b = ds.begin(portion), e = ds.end(portion);
    const Index m = ds.m();
    RegressorTable tab;
    tab.flavor = flavor;
    tab.i = i;
    tab.p = p;
    tab.o = o;
    tab.m = static_cast<int>(m);
    const Index dim = regressor_dim(flavor, o, static_cast<int>(m), p);
    // admissible k: ARX needs k-o+1 >= b; both need k+p <= e-1
    const Index k0 = flavor == Flavor::Arx ? b + o - 1 : b;
    const Index k1 = e - 1 - p;
    if (flavor == Flavor::StateSpace && o != ds.q())
        throw std::invalid_argument("build_regressors: state-space flavor needs o equal to the output count");
    if (k1 < k0) throw std::invalid_argument("build_regressors: portion too short for o=" + std::to_string(o) +
                                             ", p=" + std::to_string(p));
    const Index N = (k1 - k0) / stride + 1;
    tab.phi.resize(N, dim);
    tab.y.resize(N);
    tab.k.resize(static_cast<std::size_t>(N));
    for (Index r = 0; r < N; ++r) {
        const Index k = k0 + r * stride;
        tab.k[r] = k;
        tab.y(r) = ds.y(k + p, i);
        auto row = tab.phi.row(r);
        if (flavor == Flavor::Arx) {
            for (int l = 0; l < o; ++l) row(l) = ds.y(k - l, i);
            // u(k+p-1), ..., u(k-o+1)
            const Index nu = o + p - 1;
            for (Index s = 0; s < nu; ++s)
                for (Index j = 0; j < m; ++j) row(o + s * m + j) = ds.u(k + p - 1 - s, j);
        } else {
            for (int l = 0; l < o; ++l) row(l) = ds.y(k, l);
            // u(k), ..., u(k+p-1)
            for (Index s = 0; s < p; ++s)
                for (Index j = 0; j < m; ++j) row(o + s * m + j) = ds.u(k + s, j);
        }
    }
    return tab;
}

void discretize(const Matrix& Ac, const Matrix& Bc, double ts, Discretization method, Matrix& Ad, Matrix& Bd) {
    const Index n = Ac.rows(), m = Bc.cols();
    if (method == Discretization::ZeroOrderHold) {
        Matrix M = Matrix::Zero(n + m, n + m);
        M.topLeftCorner(n, n) = Ac * ts;
        M.topRightCorner(n, m) = Bc * ts;
        Matrix E = M.exp();
        Ad = E.topLeftCorner(n, n);
        Bd = E.topRightCorner(n, m);
    } else {
        Matrix I = Matrix::Identity(n, n);
        Eigen::PartialPivLU<Matrix> lu(I - 0.5 * ts * Ac);
        Ad = lu.solve(I + 0.5 * ts * Ac);
        Bd = lu.solve(Bc * ts);
    }
}

LtiSystem benchmark_system(double ts, Discretization method) {
    Matrix Ac(3, 3);
    Ac << 0, 0, -160, 1, 0, -24, 0, 1, -10.8;
    Matrix Bc(3, 1);
    Bc << 160, 0, 0;
    LtiSystem sys;
    discretize(Ac, Bc, ts, method, sys.A, sys.B);
    sys.C = Matrix::Identity(3, 3);
    sys.x0 = Vector::Zero(3);
    return sys;
}

}  // namespace smbound
