#pragma once

#include <chanest/closed_form_metrics.hpp>
#include <chanest/errors.hpp>
#include <chanest/estimators.hpp>
#include <chanest/monte_carlo.hpp>
#include <chanest/parallel.hpp>
#include <chanest/signal_model.hpp>

#include <algorithm>
#include <array>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace chanest {

enum class SweepMode { ClosedForm, MonteCarlo };

/// One declarative experiment: a data-SNR sweep of estimators x metrics.
struct SweepSpec {
    std::string name;
    std::vector<double> snr_grid_db;
    double training_snr_db = 0.0;
    std::size_t training_length = 0;  // B
    double trim_lambda = 0.1;
    ChannelPrior prior = ChannelPrior::complex_gaussian(1.0);
    std::string constellation = "qpsk";
    double symbol_power = 1.0;
    std::optional<double> ud_second_moment;
    std::vector<EstimatorKind> estimators;
    std::vector<MetricKind> metrics;
    SweepMode mode = SweepMode::ClosedForm;
    McConfig mc;
    /// Trial count for Pe points at or above `high_snr_db` (0: same as mc.n_trials).
    std::uint64_t pe_trials_high_snr = 0;
    double high_snr_db = 20.0;
    std::uint64_t channel_draws = 100'000;
    double pe_a = 1.0;
    double pe_b = 1.0;
};

struct CsvRow {
    double snr_db = 0.0;
    std::string estimator;
    std::string metric;
    double value = 0.0;
    std::optional<double> std_error;  // empty for closed-form values
    std::uint64_t n_trials = 0;       // 0 for closed-form values

    bool operator==(const CsvRow&) const = default;
};

struct PresetInfo {
    std::string_view name;
    std::string_view description;
};

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_value(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.11e", v);
    return buf;
}

inline std::string format_snr(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::optional<double> parse_double(std::string_view text)
{
    const std::string s(text);
    if (s.empty())
        return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE)
        return std::nullopt;
    return v;
}

/// Round to the 12 significant digits that the CSV carries.
inline double round12(double v) { return std::strtod(format_value(v).c_str(), nullptr); }

inline std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader = "snr_db,estimator,metric,value,std_error,n_trials";

inline void write_csv_header(std::ostream& out) { out << kCsvHeader << '\n'; }

inline void write_csv_row(std::ostream& out, const CsvRow& r)
{
    out << detail::format_snr(r.snr_db) << ',' << r.estimator << ',' << r.metric << ','
        << detail::format_value(r.value) << ',' << (r.std_error ? detail::format_value(*r.std_error) : "") << ','
        << r.n_trials << '\n';
}

inline void write_csv(std::ostream& out, const std::vector<CsvRow>& rows)
{
    write_csv_header(out);
    for (const auto& r : rows)
        write_csv_row(out, r);
}

inline std::vector<CsvRow> parse_csv(std::string_view text)
{
    std::vector<CsvRow> rows;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = detail::trim(line);
        if (line_no == 1) {
            if (t != kCsvHeader)
                throw std::invalid_argument("parse_csv: unexpected header");
            continue;
        }
        if (t.empty())
            continue;
        const auto f = detail::split(t, ',');
        if (f.size() != 6)
            throw std::invalid_argument("parse_csv: line " + std::to_string(line_no) + ": expected 6 fields");
        CsvRow r;
        const auto snr = detail::parse_double(f[0]);
        const auto val = detail::parse_double(f[3]);
        if (!snr || !val)
            throw std::invalid_argument("parse_csv: line " + std::to_string(line_no) + ": bad number");
        r.snr_db = *snr;
        r.estimator = std::string(f[1]);
        r.metric = std::string(f[2]);
        r.value = *val;
        if (!f[4].empty()) {
            const auto se = detail::parse_double(f[4]);
            if (!se)
                throw std::invalid_argument("parse_csv: line " + std::to_string(line_no) + ": bad std_error");
            r.std_error = *se;
        }
        r.n_trials = std::stoull(std::string(f[5]));
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace detail {

struct ConfigEntry {
    std::string value;
    int line;
};

class ConfigReader {
public:
    explicit ConfigReader(std::map<std::string, ConfigEntry> entries) : entries_(std::move(entries)) {}

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    const ConfigEntry& entry(const std::string& key) const
    {
        const auto it = entries_.find(key);
        if (it == entries_.end())
            throw ConfigError(key, "required key is missing");
        return it->second;
    }

    double number(const std::string& key) const
    {
        const auto& e = entry(key);
        const auto v = parse_number(e.value);
        if (!v)
            throw ConfigError(key, "expected a number, got '" + e.value + "'", e.line);
        return *v;
    }

    double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    std::uint64_t count(const std::string& key) const
    {
        const double v = number(key);
        if (!(v >= 1.0) || v != std::floor(v) || v > 9.0e18)
            throw ConfigError(key, "expected a positive integer", entry(key).line);
        return static_cast<std::uint64_t>(v);
    }

    std::uint64_t count_or(const std::string& key, std::uint64_t fallback) const
    {
        return has(key) ? count(key) : fallback;
    }

    std::string text_or(const std::string& key, std::string fallback) const
    {
        return has(key) ? entry(key).value : fallback;
    }

    /// Accepts plain decimals and fractions "p/q".
    static std::optional<double> parse_number(std::string_view s)
    {
        if (const auto slash = s.find('/'); slash != std::string_view::npos) {
            const auto p = parse_double(trim(s.substr(0, slash)));
            const auto q = parse_double(trim(s.substr(slash + 1)));
            if (!p || !q || *q == 0.0)
                return std::nullopt;
            return *p / *q;
        }
        return parse_double(s);
    }

private:
    std::map<std::string, ConfigEntry> entries_;
};

inline const std::map<std::string, std::set<std::string>>& known_keys()
{
    static const std::map<std::string, std::set<std::string>> keys = {
        {"scenario",
         {"training_snr_db", "B", "lambda", "prior", "prior_variance", "prior_half_width", "prior_h_re",
          "prior_h_im", "constellation", "symbol_power", "ud_second_moment"}},
        {"sweep", {"name", "snr_db", "estimators", "metrics", "mode", "pe_a", "pe_b"}},
        {"monte_carlo",
         {"trials", "seed", "chunk_size", "h_lambda", "channel_draws", "pe_trials_high_snr", "high_snr_db"}},
    };
    return keys;
}

inline std::vector<double> parse_snr_grid(const ConfigEntry& e)
{
    std::vector<double> grid;
    if (e.value.find(':') != std::string::npos) {
        const auto parts = split(e.value, ':');
        if (parts.size() != 3)
            throw ConfigError("snr_db", "range must be start:step:stop", e.line);
        const auto a = ConfigReader::parse_number(parts[0]);
        const auto st = ConfigReader::parse_number(parts[1]);
        const auto b = ConfigReader::parse_number(parts[2]);
        if (!a || !st || !b || !(*st > 0.0) || *b < *a)
            throw ConfigError("snr_db", "invalid range '" + e.value + "'", e.line);
        const auto n = static_cast<std::size_t>(std::floor((*b - *a) / *st + 1e-9)) + 1;
        for (std::size_t i = 0; i < n; ++i)
            grid.push_back(*a + static_cast<double>(i) * *st);
    } else {
        for (const auto tok : split(e.value, ',')) {
            const auto v = ConfigReader::parse_number(tok);
            if (!v)
                throw ConfigError("snr_db", "bad value '" + std::string(tok) + "'", e.line);
            grid.push_back(*v);
        }
    }
    if (grid.empty())
        throw ConfigError("snr_db", "grid is empty", e.line);
    return grid;
}

inline MetricKind parse_metric(std::string_view tok, int line)
{
    for (auto k : {MetricKind::MseX_DC, MetricKind::MseX_RC, MetricKind::MseXe_DC, MetricKind::MseXe_RC,
                   MetricKind::ZerothPe, MetricKind::AvgZerothPe, MetricKind::Pe})
        if (tok == to_string(k))
            return k;
    throw ConfigError("metrics", "unknown metric '" + std::string(tok) + "'", line);
}

}  // namespace detail

/// Checks cross-field consistency; throws ConfigError naming the field.
inline void validate(const SweepSpec& s)
{
    if (s.snr_grid_db.empty())
        throw ConfigError("snr_db", "grid is empty");
    for (double v : s.snr_grid_db)
        if (!std::isfinite(v))
            throw ConfigError("snr_db", "non-finite SNR");
    if (s.training_length < 1)
        throw ConfigError("B", "training length must be >= 1");
    if (!std::isfinite(s.training_snr_db))
        throw ConfigError("training_snr_db", "must be finite");
    if (!(s.trim_lambda >= 0.0))
        throw ConfigError("lambda", "must be >= 0");
    if (!(s.symbol_power > 0.0))
        throw ConfigError("symbol_power", "must be > 0");
    if (!(s.pe_a > 0.0))
        throw ConfigError("pe_a", "must be > 0");
    if (!(s.pe_b > 0.0))
        throw ConfigError("pe_b", "must be > 0");
    if (!(s.prior.second_moment() > 0.0))
        throw ConfigError("prior", "channel second moment must be > 0");
    try {
        (void)Constellation::by_name(s.constellation, s.symbol_power);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("constellation", e.what());
    }
    if (s.estimators.empty())
        throw ConfigError("estimators", "list is empty");
    if (s.metrics.empty())
        throw ConfigError("metrics", "list is empty");
    for (const auto& k : s.estimators) {
        try {
            validate(k);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("estimators", e.what());
        }
    }
    const bool mc = s.mode == SweepMode::MonteCarlo;
    for (auto m : s.metrics) {
        const bool dc = m == MetricKind::MseX_DC || m == MetricKind::MseXe_DC;
        const bool rc = m == MetricKind::MseX_RC || m == MetricKind::MseXe_RC || m == MetricKind::AvgZerothPe;
        if (dc && s.prior.is_random())
            throw ConfigError("metrics", std::string(to_string(m)) + " needs a deterministic prior");
        if (rc && !s.prior.is_random())
            throw ConfigError("metrics", std::string(to_string(m)) + " needs a random prior");
        if (mc && (m == MetricKind::ZerothPe || m == MetricKind::AvgZerothPe))
            throw ConfigError("metrics", std::string(to_string(m)) + " is only available in closed_form mode");
        if (!mc && m == MetricKind::Pe)
            throw ConfigError("metrics", "pe is only available in monte_carlo mode");
        if (mc && m != MetricKind::Pe && !(s.trim_lambda > 0.0))
            throw ConfigError("lambda", "Monte Carlo MSE metrics need lambda > 0 (infinite moment otherwise)");
    }
    s.mc.validate();
}

/// Parses the flat sectioned key/value format:
///
///     # comment
///     [scenario]
///     training_snr_db = 0
///     B = 5
///     [sweep]
///     snr_db = 0:2:30
///     estimators = mvu, mmse, opt_rc, opt_ud
///     metrics = mse_x_rc
///
/// Unknown sections or keys are rejected with their line number.
inline SweepSpec parse_spec(std::string_view text)
{
    std::map<std::string, detail::ConfigEntry> entries;
    std::string section;
    int line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    const auto& known = detail::known_keys();
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto c = line.find('#'); c != std::string_view::npos)
            line = line.substr(0, c);
        line = detail::trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("", "unterminated section header", line_no);
            section = std::string(detail::trim(line.substr(1, line.size() - 2)));
            if (!known.count(section))
                throw ConfigError(section, "unknown section", line_no);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("", "expected 'key = value'", line_no);
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string value(detail::trim(line.substr(eq + 1)));
        if (section.empty())
            throw ConfigError(key, "key outside of any section", line_no);
        if (!known.at(section).count(key))
            throw ConfigError(key, "unknown key in section [" + section + "]", line_no);
        if (value.empty())
            throw ConfigError(key, "empty value", line_no);
        if (!entries.emplace(key, detail::ConfigEntry{value, line_no}).second)
            throw ConfigError(key, "duplicate key", line_no);
    }

    const detail::ConfigReader cfg(std::move(entries));
    SweepSpec s;
    s.name = cfg.text_or("name", "custom");
    s.training_snr_db = cfg.number("training_snr_db");
    s.training_length = static_cast<std::size_t>(cfg.count("B"));
    s.trim_lambda = cfg.number_or("lambda", 0.1);

    const std::string prior = cfg.text_or("prior", "complex_gaussian");
    try {
        if (prior == "complex_gaussian")
            s.prior = ChannelPrior::complex_gaussian(cfg.number_or("prior_variance", 1.0));
        else if (prior == "uniform_box")
            s.prior = ChannelPrior::uniform_box(cfg.number("prior_half_width"));
        else if (prior == "deterministic")
            s.prior = ChannelPrior::deterministic({cfg.number("prior_h_re"), cfg.number_or("prior_h_im", 0.0)});
        else
            throw ConfigError("prior", "unknown prior '" + prior + "'", cfg.entry("prior").line);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("prior", e.what());
    }

    s.constellation = cfg.text_or("constellation", "qpsk");
    s.symbol_power = cfg.number_or("symbol_power", 1.0);
    if (cfg.has("ud_second_moment"))
        s.ud_second_moment = cfg.number("ud_second_moment");

    s.snr_grid_db = detail::parse_snr_grid(cfg.entry("snr_db"));

    const auto& est_entry = cfg.entry("estimators");
    for (const auto tok : detail::split(est_entry.value, ',')) {
        if (tok == "mvu")
            s.estimators.emplace_back(kind::Mvu{});
        else if (tok == "mmse")
            s.estimators.emplace_back(kind::Mmse{});
        else if (tok == "opt_rc")
            s.estimators.emplace_back(kind::OptZfRc{});
        else if (tok == "opt_dc") {
            if (s.prior.is_random())
                throw ConfigError("estimators", "opt_dc needs a deterministic prior", est_entry.line);
            s.estimators.emplace_back(kind::OptZfDc{s.prior.second_moment()});
        } else if (tok == "opt_ud") {
            if (!s.ud_second_moment)
                throw ConfigError("ud_second_moment", "required by estimator opt_ud", est_entry.line);
            s.estimators.emplace_back(kind::OptZfUd{*s.ud_second_moment});
        } else if (tok.starts_with("bias:")) {
            const auto a = detail::ConfigReader::parse_number(tok.substr(5));
            if (!a)
                throw ConfigError("estimators", "bad bias value in '" + std::string(tok) + "'", est_entry.line);
            s.estimators.emplace_back(kind::BiasScaled{*a});
        } else {
            throw ConfigError("estimators", "unknown estimator '" + std::string(tok) + "'", est_entry.line);
        }
    }

    const auto& met_entry = cfg.entry("metrics");
    for (const auto tok : detail::split(met_entry.value, ','))
        s.metrics.push_back(detail::parse_metric(tok, met_entry.line));

    const std::string mode = cfg.text_or("mode", "closed_form");
    if (mode == "closed_form")
        s.mode = SweepMode::ClosedForm;
    else if (mode == "monte_carlo")
        s.mode = SweepMode::MonteCarlo;
    else
        throw ConfigError("mode", "expected closed_form or monte_carlo", cfg.entry("mode").line);

    s.pe_a = cfg.number_or("pe_a", 1.0);
    s.pe_b = cfg.number_or("pe_b", 1.0);
    s.mc.n_trials = cfg.count_or("trials", 1'000'000);
    if (cfg.has("seed")) {
        const auto& e = cfg.entry("seed");
        const char* end = e.value.data() + e.value.size();
        const auto [ptr, ec] = std::from_chars(e.value.data(), end, s.mc.seed);
        if (ec != std::errc{} || ptr != end)
            throw ConfigError("seed", "expected a non-negative 64-bit integer", e.line);
    }
    s.mc.chunk_size = cfg.count_or("chunk_size", 4096);
    if (cfg.has("h_lambda"))
        s.mc.h_regularization_lambda = cfg.number("h_lambda");
    s.channel_draws = cfg.count_or("channel_draws", 100'000);
    s.pe_trials_high_snr = cfg.has("pe_trials_high_snr") ? cfg.count("pe_trials_high_snr") : 0;
    s.high_snr_db = cfg.number_or("high_snr_db", 20.0);

    validate(s);
    return s;
}

inline SweepSpec load_spec(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("", "cannot open spec file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_spec(buf.str());
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

namespace detail {

struct PresetText {
    std::string_view name;
    std::string_view description;
    std::string_view text;
};

// Common to every figure: h ~ CN(0, 1), QPSK, data SNR 0..30 dB.
inline constexpr std::array<PresetText, 8> kPresets = {{
    {"fig1", "zeroth-order MSE_x (random channel), training SNR 0 dB, B=5, closed form",
     R"(
[scenario]
training_snr_db = 0
B = 5
lambda = 0.1
ud_second_moment = 3
[sweep]
name = fig1
snr_db = 0:2:30
estimators = mvu, mmse, opt_rc, opt_ud
metrics = mse_x_rc
mode = closed_form
)"},
    {"fig2", "zeroth-order excess MSE (random channel), training SNR 0 dB, B=2, closed form",
     R"(
[scenario]
training_snr_db = 0
B = 2
lambda = 0.1
ud_second_moment = 3
[sweep]
name = fig2
snr_db = 0:2:30
estimators = mvu, mmse, opt_rc, opt_ud
metrics = mse_xe_rc
mode = closed_form
)"},
    {"fig3", "average zeroth-order Pe Q(sqrt(SNR_0)) over h, training SNR 10 dB, B=5, a=b=1",
     R"(
[scenario]
training_snr_db = 10
B = 5
lambda = 0.1
ud_second_moment = 3
[sweep]
name = fig3
snr_db = 0:2:30
estimators = mvu, mmse, opt_rc, opt_ud
metrics = avg_zeroth_pe
mode = closed_form
pe_a = 1
pe_b = 1
[monte_carlo]
channel_draws = 100000
seed = 1
)"},
    {"fig4", "true MSE_x (random channel), training SNR 0 dB, B=5, lambda=0.1, E_ud=3, Monte Carlo",
     R"(
[scenario]
training_snr_db = 0
B = 5
lambda = 0.1
ud_second_moment = 3
[sweep]
name = fig4
snr_db = 0:2:30
estimators = mvu, mmse, opt_rc, opt_ud
metrics = mse_x_rc
mode = monte_carlo
[monte_carlo]
trials = 1000000
seed = 1
)"},
    {"fig5", "true excess MSE (random channel), training SNR 0 dB, B=2, lambda=0.1, E_ud=3, Monte Carlo",
     R"(
[scenario]
training_snr_db = 0
B = 2
lambda = 0.1
ud_second_moment = 3
[sweep]
name = fig5
snr_db = 0:2:30
estimators = mvu, mmse, opt_rc, opt_ud
metrics = mse_xe_rc
mode = monte_carlo
[monte_carlo]
trials = 1000000
seed = 1
h_lambda = 0.1
)"},
    {"fig6", "true symbol error probability, training SNR 10 dB, B=5, lambda=0.1, E_ud=3, Monte Carlo",
     R"(
[scenario]
training_snr_db = 10
B = 5
lambda = 0.1
ud_second_moment = 3
[sweep]
name = fig6
snr_db = 0:2:30
estimators = mvu, mmse, opt_rc, opt_ud
metrics = pe
mode = monte_carlo
[monte_carlo]
trials = 1000000
pe_trials_high_snr = 10000000
high_snr_db = 20
seed = 1
)"},
    {"fig7", "true MSE_x (random channel), training SNR 0 dB, B=5, lambda=0.1, E_ud=1/2 (bias tuning)",
     R"(
[scenario]
training_snr_db = 0
B = 5
lambda = 0.1
ud_second_moment = 1/2
[sweep]
name = fig7
snr_db = 0:2:30
estimators = mvu, mmse, opt_rc, opt_ud
metrics = mse_x_rc
mode = monte_carlo
[monte_carlo]
trials = 1000000
seed = 1
)"},
    {"fig8", "true excess MSE (random channel), training SNR 0 dB, B=2, lambda=0.1, E_ud=1/6 (bias tuning)",
     R"(
[scenario]
training_snr_db = 0
B = 2
lambda = 0.1
ud_second_moment = 1/6
[sweep]
name = fig8
snr_db = 0:2:30
estimators = mvu, mmse, opt_rc, opt_ud
metrics = mse_xe_rc
mode = monte_carlo
[monte_carlo]
trials = 1000000
seed = 1
h_lambda = 0.1
)"},
}};

}  // namespace detail

inline std::vector<PresetInfo> list_presets()
{
    std::vector<PresetInfo> out;
    for (const auto& p : detail::kPresets)
        out.push_back({p.name, p.description});
    return out;
}

inline std::string_view preset_text(std::string_view name)
{
    for (const auto& p : detail::kPresets)
        if (p.name == name)
            return p.text;
    throw ConfigError("preset", "unknown preset '" + std::string(name) + "'");
}

inline SweepSpec preset(std::string_view name) { return parse_spec(preset_text(name)); }

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

inline std::string metric_label(MetricKind m, SweepMode mode)
{
    if (m == MetricKind::ZerothPe || m == MetricKind::AvgZerothPe)
        return std::string(to_string(m));
    if (m == MetricKind::Pe)
        return "true_pe";
    return (mode == SweepMode::ClosedForm ? "zeroth_" : "true_") + std::string(to_string(m));
}

/// Scenario of one sweep point.
inline Scenario sweep_scenario(const SweepSpec& spec, double snr_db)
{
    return Scenario::from_snr(spec.prior, Constellation::by_name(spec.constellation, spec.symbol_power),
                              spec.training_length, snr_db, spec.training_snr_db, spec.trim_lambda);
}

/// Value of one (metric, estimator, SNR) cell.
inline CsvRow evaluate_point(const SweepSpec& spec, MetricKind m, const EstimatorKind& k, double snr_db,
                             unsigned workers = 0)
{
    const Scenario sc = sweep_scenario(spec, snr_db);
    const LinearEstimator est = make_estimator(k, sc);
    const auto& tr = sc.training();
    const double sx2 = sc.symbol_power();
    const double sw2 = sc.noise_power();
    const double m2 = sc.prior().second_moment();

    CsvRow row;
    row.snr_db = snr_db;
    row.estimator = label(k);
    row.metric = metric_label(m, spec.mode);

    McConfig mc = spec.mc;
    mc.workers = workers;
    std::optional<McResult> mcr;
    if (spec.mode == SweepMode::ClosedForm) {
        switch (m) {
        case MetricKind::MseX_DC:
        case MetricKind::MseX_RC: row.value = zeroth_mse_x_dc(make_zeroth_inputs(est, tr, m2, sx2, sw2)); break;
        case MetricKind::MseXe_DC: row.value = zeroth_mse_xe_dc(make_zeroth_inputs(est, tr, m2, sx2, sw2)); break;
        case MetricKind::MseXe_RC:
            row.value = zeroth_mse_xe_rc(make_zeroth_inputs(est, tr, m2, sx2, sw2, sc.prior().fourth_moment()));
            break;
        case MetricKind::ZerothPe:
            row.value = zeroth_pe(make_zeroth_inputs(est, tr, m2, sx2, sw2), spec.pe_a, spec.pe_b);
            break;
        case MetricKind::AvgZerothPe:
            mcr = avg_zeroth_pe(est.filter(), sc, spec.pe_a, spec.pe_b, spec.channel_draws, spec.mc.seed, workers);
            break;
        case MetricKind::Pe: throw ConfigError("metrics", "pe is only available in monte_carlo mode");
        }
    } else {
        switch (m) {
        case MetricKind::MseX_DC:
        case MetricKind::MseX_RC: mcr = true_mse_x(sc, est, mc); break;
        case MetricKind::MseXe_DC:
        case MetricKind::MseXe_RC: mcr = true_mse_xe(sc, est, mc); break;
        case MetricKind::Pe:
            if (spec.pe_trials_high_snr > 0 && snr_db >= spec.high_snr_db)
                mc.n_trials = spec.pe_trials_high_snr;
            mcr = true_pe(sc, est, mc);
            break;
        default: throw ConfigError("metrics", std::string(to_string(m)) + " is only available in closed_form mode");
        }
    }
    if (mcr) {
        row.value = mcr->mean;
        row.std_error = detail::round12(mcr->std_error);
        row.n_trials = mcr->n;
    }
    if (!std::isfinite(row.value))
        throw std::domain_error("non-finite " + row.metric + " for " + row.estimator + " at " +
                                detail::format_snr(snr_db) + " dB");
    row.value = detail::round12(row.value);
    return row;
}

/// Runs every (metric, estimator, SNR) cell, ordered by metric, then
/// estimator, then SNR, streaming CSV rows to `out` as they complete.
/// Every cell uses the same seed, so estimator comparisons are paired.
inline std::vector<CsvRow> run_sweep(const SweepSpec& spec, std::ostream& out, unsigned workers = 0)
{
    validate(spec);
    std::vector<CsvRow> rows;
    write_csv_header(out);
    for (auto m : spec.metrics)
        for (const auto& k : spec.estimators)
            for (double snr : spec.snr_grid_db) {
                rows.push_back(evaluate_point(spec, m, k, snr, workers));
                write_csv_row(out, rows.back());
                out.flush();
            }
    return rows;
}

}  // namespace chanest
