#include "stasplit/control_protocol.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <cmath>
#include <istream>
#include <ostream>

#include "stasplit/csv.hpp"
#include "stasplit/errors.hpp"

namespace stasplit {

std::string to_string(ProtocolKind kind) {
    switch (kind) {
    case ProtocolKind::faquad: return "faquad";
    case ProtocolKind::invariant: return "invariant";
    case ProtocolKind::linear_reference: return "linear_reference";
    case ProtocolKind::tabulated: return "tabulated";
    }
    return "unknown";
}

ControlProtocol::ControlProtocol(ProtocolKind kind, double t_final, Evaluator eval)
    : kind_(kind), t_final_(t_final), eval_(std::move(eval)) {
    if (!(t_final > 0.0))
        throw ConfigError("protocol: t_final must be positive");
}

TwoLevelHamiltonian ControlProtocol::operator()(double t) const {
    double slack = 1e-12 * t_final_;
    if (!(t >= -slack && t <= t_final_ + slack))
        throw NumericalError("protocol evaluated outside [0, t_final] at t = " + format_number(t));
    t = std::clamp(t, 0.0, t_final_);
    auto h = eval_(t);
    if (!std::isfinite(h.delta_tunnel) || !std::isfinite(h.lambda_bias))
        throw NumericalError("protocol value not finite at t = " + format_number(t));
    return h;
}

ControlProtocol tabulated_protocol(const std::vector<double>& times, const std::vector<double>& delta,
                                   const std::vector<double>& lambda) {
    const std::size_t n = times.size();
    if (n < 5 || delta.size() != n || lambda.size() != n)
        throw ConfigError("tabulated protocol needs at least 5 rows of (t, delta, lambda)");
    if (std::abs(times.front()) > 0.0)
        throw ConfigError("tabulated protocol must start at t = 0");
    double h = (times.back() - times.front()) / static_cast<double>(n - 1);
    if (!(h > 0.0))
        throw ConfigError("tabulated protocol: times must be ascending");
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(times[i] - h * static_cast<double>(i)) > 1e-6 * h)
            throw ConfigError("tabulated protocol: times must be uniformly spaced (row " +
                              std::to_string(i) + ")");
    using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;
    auto sd = std::make_shared<Spline>(delta.begin(), delta.end(), 0.0, h);
    auto sl = std::make_shared<Spline>(lambda.begin(), lambda.end(), 0.0, h);
    double tf = times.back();
    double d_end = delta.back();
    double l_end = lambda.back();
    return ControlProtocol(ProtocolKind::tabulated, tf, [sd, sl, tf, d_end, l_end](double t) {
        if (t >= tf)
            return TwoLevelHamiltonian{l_end, d_end};
        return TwoLevelHamiltonian{(*sl)(t), (*sd)(t)};
    });
}

ControlProtocol tabulate(const ControlProtocol& protocol, std::size_t n_samples) {
    if (n_samples < 5)
        throw ConfigError("tabulate: need at least 5 samples");
    std::vector<double> t(n_samples), d(n_samples), l(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        t[i] = i + 1 == n_samples ? protocol.t_final()
                                  : protocol.t_final() * static_cast<double>(i) / (n_samples - 1);
        auto h = protocol(t[i]);
        d[i] = h.delta_tunnel;
        l[i] = h.lambda_bias;
    }
    return tabulated_protocol(t, d, l);
}

void write_protocol_csv(std::ostream& out, const ControlProtocol& protocol, std::size_t n_rows) {
    if (n_rows < 2)
        throw ConfigError("protocol csv needs at least 2 rows");
    CsvTable table;
    table.comments.push_back(" kind=" + to_string(protocol.kind()));
    table.header = {"t", "delta", "lambda"};
    for (std::size_t i = 0; i < n_rows; ++i) {
        double t = i + 1 == n_rows ? protocol.t_final()
                                   : protocol.t_final() * static_cast<double>(i) / (n_rows - 1);
        auto h = protocol(t);
        table.rows.push_back({t, h.delta_tunnel, h.lambda_bias});
    }
    write_csv(out, table);
}

ControlProtocol read_protocol_csv(std::istream& in) {
    auto table = read_csv(in);
    if (table.header != std::vector<std::string>{"t", "delta", "lambda"})
        throw ConfigError("protocol csv: header must be t,delta,lambda");
    std::vector<double> t, d, l;
    for (const auto& row : table.rows) {
        t.push_back(row[0]);
        d.push_back(row[1]);
        l.push_back(row[2]);
    }
    return tabulated_protocol(t, d, l);
}

}  // namespace stasplit
