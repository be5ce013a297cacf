#include "json_detail.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#ifndef SMBOUND_VERSION_STRING
#define SMBOUND_VERSION_STRING "unknown"
#endif

namespace smbound {

const char* version_string() { return SMBOUND_VERSION_STRING; }

namespace detail {

json vector_value(const Vector& v) {
    json a = json::array();
    for (Index k = 0; k < v.size(); ++k) a.push_back(v(k));
    return a;
}

Vector vector_from(const json& j) {
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Index>(k)) = j[k].get<double>();
    return v;
}

json matrix_value(const Matrix& m) {
    json a = json::array();
    for (Index r = 0; r < m.rows(); ++r) a.push_back(vector_value(m.row(r).transpose()));
    return a;
}

json envelope_value(const DecayEnvelope& e) {
    return json{{"i", e.i + 1},          {"L_hat", e.L_hat}, {"rho_hat", e.rho_hat}, {"L_prime", e.L_prime},
                {"L_u", e.L_u},          {"p_bar", e.p_bar}, {"degenerate", e.degenerate}};
}

DecayEnvelope envelope_from(const json& j) {
    DecayEnvelope e;
    e.i = j.at("i").get<int>() - 1;
    e.L_hat = j.at("L_hat").get<double>();
    e.rho_hat = j.at("rho_hat").get<double>();
    e.L_prime = j.at("L_prime").get<double>();
    e.L_u = j.at("L_u").get<double>();
    e.p_bar = j.at("p_bar").get<int>();
    e.degenerate = j.value("degenerate", false);
    return e;
}

json lambda_value(const LambdaSeries& s) {
    json om = json::array();
    for (char c : s.omega_active) om.push_back(c != 0);
    return json{{"i", s.i + 1},           {"o", s.o},       {"flavor", to_string(s.flavor)}, {"d_bar", s.d_bar},
                {"p", s.p},               {"residual", s.residual}, {"lambda", s.values}, {"omega_active", om}};
}

LambdaSeries lambda_from(const json& j) {
    LambdaSeries s;
    s.i = j.at("i").get<int>() - 1;
    s.o = j.at("o").get<int>();
    s.flavor = flavor_from_string(j.at("flavor").get<std::string>());
    s.d_bar = j.at("d_bar").get<double>();
    s.p = j.at("p").get<std::vector<int>>();
    s.residual = j.at("residual").get<std::vector<double>>();
    s.values = j.at("lambda").get<std::vector<double>>();
    for (const auto& b : j.value("omega_active", json::array())) s.omega_active.push_back(b.get<bool>() ? 1 : 0);
    return s;
}

json certificate_value(const StabilityCertificate& c) {
    return json{{"certified", c.certified},
                {"p_bar", c.p_bar},
                {"chi", c.chi},
                {"fail_p", c.fail_p},
                {"fail_index", c.fail_index},
                {"spectral_radius", c.spectral_radius},
                {"reason", c.reason}};
}

StabilityCertificate certificate_from(const json& j) {
    StabilityCertificate c;
    c.certified = j.at("certified").get<bool>();
    c.p_bar = j.at("p_bar").get<int>();
    c.chi = j.at("chi").get<double>();
    c.fail_p = j.at("fail_p").get<int>();
    c.fail_index = j.at("fail_index").get<Index>();
    c.spectral_radius = j.at("spectral_radius").get<double>();
    c.reason = j.at("reason").get<std::string>();
    return c;
}

json tau_value(const TauSeries& t) {
    json fin = json::array(), it = json::array();
    for (const auto& [p, v] : t.finite) fin.push_back({p, v});
    for (const auto& [p, v] : t.iterative) it.push_back({p, v});
    json j{{"i", t.i + 1},       {"flavor", to_string(t.flavor)}, {"gamma", t.gamma}, {"d_bar", t.d_bar},
           {"o", t.o},           {"p_bar", t.p_bar},              {"finite", fin},    {"iterative", it},
           {"chi", t.chi},       {"has_inf", t.has_inf},          {"tau_max", t.tau_max},
           {"overshoot_possible", t.overshoot_possible},          {"ell_bar", t.ell_bar},
           {"bridged", t.bridged}};
    j["tau_inf"] = t.has_inf ? json(t.tau_inf) : json(nullptr);
    return j;
}

json model_value(const IdentifiedModel& m) {
    json j;
    j["flavor"] = to_string(m.flavor);
    j["method"] = to_string(m.method);
    j["o"] = m.o;
    j["m"] = m.m;
    j["q"] = m.q;
    json th = json::array();
    for (const auto& t : m.theta1) th.push_back(vector_value(t));
    j["theta1"] = th;
    json env = json::array();
    for (const auto& e : m.envelopes) env.push_back(envelope_value(e));
    j["envelope"] = env;
    j["alpha"] = m.alpha;
    j["gamma"] = m.gamma;
    j["d_bar"] = vector_value(m.d_bar);
    json lam = json::array();
    for (const auto& s : m.lambda) lam.push_back(lambda_value(s));
    j["lambda"] = lam;
    json bounds = json::array();
    for (std::size_t i = 0; i < m.tau_p.size(); ++i) {
        json b{{"i", static_cast<int>(i) + 1}, {"p", m.tau_p[i]}, {"tau_hat", m.tau_hat[i]}};
        b["tau_inf"] = i < m.tau_inf.size() && std::isfinite(m.tau_inf[i]) ? json(m.tau_inf[i]) : json(nullptr);
        bounds.push_back(b);
    }
    j["bounds"] = bounds;
    j["chi"] = m.chi;
    json st = json::array();
    for (const auto& c : m.stability) st.push_back(certificate_value(c));
    j["stability"] = st;
    return j;
}

IdentifiedModel model_from(const json& j) {
    IdentifiedModel m;
    m.flavor = flavor_from_string(j.at("flavor").get<std::string>());
    m.method = method_from_string(j.at("method").get<std::string>());
    m.o = j.at("o").get<int>();
    m.m = j.at("m").get<int>();
    m.q = j.at("q").get<int>();
    for (const auto& t : j.at("theta1")) m.theta1.push_back(vector_from(t));
    if (static_cast<int>(m.theta1.size()) != m.q) throw std::invalid_argument("model: theta1 count differs from q");
    for (const auto& e : j.value("envelope", json::array())) m.envelopes.push_back(envelope_from(e));
    m.alpha = j.value("alpha", 1.2);
    m.gamma = j.value("gamma", 1.1);
    m.d_bar = vector_from(j.value("d_bar", json::array()));
    for (const auto& s : j.value("lambda", json::array())) m.lambda.push_back(lambda_from(s));
    for (const auto& b : j.value("bounds", json::array())) {
        m.tau_p.push_back(b.at("p").get<std::vector<int>>());
        m.tau_hat.push_back(b.at("tau_hat").get<std::vector<double>>());
        m.tau_inf.push_back(b.at("tau_inf").is_null() ? std::numeric_limits<double>::infinity()
                                                      : b.at("tau_inf").get<double>());
    }
    m.chi = j.value("chi", std::vector<double>{});
    for (const auto& c : j.value("stability", json::array())) m.stability.push_back(certificate_from(c));
    return m;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump(2) << '\n';
    if (!f) throw std::runtime_error("write failed: " + path);
}

json read_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

}  // namespace detail

std::string model_to_json(const IdentifiedModel& model, int indent) { return detail::model_value(model).dump(indent); }

IdentifiedModel model_from_json(const std::string& text) {
    try {
        const auto j = detail::json::parse(text);
        return detail::model_from(j.contains("model") ? j.at("model") : j);
    } catch (const detail::json::exception& e) {
        throw std::invalid_argument(std::string("model JSON: ") + e.what());
    }
}

void save_model(const std::string& path, const IdentifiedModel& model) {
    detail::json j;
    j["version"] = version_string();
    j["model"] = detail::model_value(model);
    detail::write_json(path, j);
}

IdentifiedModel load_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace smbound
