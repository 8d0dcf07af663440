#include "heatlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "heatlab/errors.hpp"
#include "heatlab/fit.hpp"
#include "heatlab/greens.hpp"
#include "heatlab/random.hpp"
#include "heatlab/steady_state.hpp"
#include "heatlab/transport.hpp"

namespace heatlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---- value parsing -------------------------------------------------------

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view name, std::string_view value) {
    throw ParameterError("config: invalid value '" + std::string(value) + "' for " + std::string(name));
}

double parse_double(std::string_view name, std::string_view raw) {
    const std::string s = trim(raw);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) bad_value(name, raw);
    return v;
}

template <class Int>
Int parse_integer(std::string_view name, std::string_view raw) {
    const std::string s = trim(raw);
    Int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        // Accept integral floating-point spellings such as "100.0" from JSON.
        const double d = parse_double(name, raw);
        if (d != std::floor(d) || d < static_cast<double>(std::numeric_limits<Int>::min()) ||
            d > static_cast<double>(std::numeric_limits<Int>::max())) {
            bad_value(name, raw);
        }
        return static_cast<Int>(d);
    }
    return v;
}

std::vector<std::string> split_list(std::string_view raw) {
    std::string s = trim(raw);
    if (!s.empty() && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto end = comma == std::string::npos ? s.size() : comma;
        std::string item = trim(std::string_view(s).substr(start, end - start));
        if (item.size() >= 2 && item.front() == '"' && item.back() == '"') item = item.substr(1, item.size() - 2);
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T, class F>
std::string join(const std::vector<T>& items, F&& fmt) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += fmt(items[i]);
    }
    return out;
}

SurfaceRecipe parse_surface_recipe(std::string_view name, std::string_view raw) {
    const std::string s = trim(raw);
    if (s == "projector") return SurfaceRecipe::Projector;
    if (s == "random") return SurfaceRecipe::RandomSymmetric;
    bad_value(name, raw);
}

std::string_view to_string(SurfaceRecipe r) { return r == SurfaceRecipe::Projector ? "projector" : "random"; }

CouplingRecipe parse_coupling(std::string_view raw) {
    const std::string s = trim(raw);
    if (s == "equal") return CouplingRecipe::Equal;
    if (s == "similar") return CouplingRecipe::Similar;
    if (s == "dissimilar") return CouplingRecipe::Dissimilar;
    bad_value("coupling", raw);
}

std::string_view to_string(CouplingRecipe r) {
    switch (r) {
        case CouplingRecipe::Equal: return "equal";
        case CouplingRecipe::Similar: return "similar";
        case CouplingRecipe::Dissimilar: return "dissimilar";
    }
    return "equal";
}

// ---- field registry ------------------------------------------------------

struct Field {
    std::string name;
    std::string help;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

Field double_field(std::string name, std::string help, double ExperimentConfig::*member) {
    return {name, std::move(help),
            [member, name](ExperimentConfig& c, std::string_view v) { c.*member = parse_double(name, v); },
            [member](const ExperimentConfig& c) { return format_double(c.*member); }};
}

template <class Get>
Field chain_double(std::string name, std::string help, Get member) {
    return {name, std::move(help),
            [member, name](ExperimentConfig& c, std::string_view v) { c.chain.*member = parse_double(name, v); },
            [member](const ExperimentConfig& c) { return format_double(c.chain.*member); }};
}

template <class Get>
Field bath_double(std::string name, std::string help, BathSpec ExperimentConfig::*bath, Get member) {
    return {name, std::move(help),
            [bath, member, name](ExperimentConfig& c, std::string_view v) {
                (c.*bath).*member = parse_double(name, v);
            },
            [bath, member](const ExperimentConfig& c) { return format_double((c.*bath).*member); }};
}

std::vector<Field> make_fields() {
    std::vector<Field> f;
    f.push_back({"experiment", "scaling | equilibrium | linearity | spectral | strength",
                 [](ExperimentConfig& c, std::string_view v) { c.experiment = parse_experiment_kind(trim(v)); },
                 [](const ExperimentConfig& c) { return std::string(to_string(c.experiment)); }});
    f.push_back({"K", "number of blocks (chain length)",
                 [](ExperimentConfig& c, std::string_view v) { c.chain.K = parse_integer<int>("K", v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.chain.K); }});
    f.push_back({"N", "block dimension",
                 [](ExperimentConfig& c, std::string_view v) { c.chain.N = parse_integer<int>("N", v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.chain.N); }});
    f.push_back(chain_double("lambda", "intra-block GOE scale", &ChainParams::lambda));
    f.push_back(chain_double("w", "inter-block coupling scale", &ChainParams::w));
    f.push_back(chain_double("v", "surface-state coupling scale", &ChainParams::v));
    f.push_back(chain_double("E1", "surface-state energy", &ChainParams::E1));
    f.push_back({"n_surf", "surface states per chain end",
                 [](ExperimentConfig& c, std::string_view v) { c.chain.n_surf = parse_integer<int>("n_surf", v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.chain.n_surf); }});

    for (int b = 1; b <= 2; ++b) {
        BathSpec ExperimentConfig::*bath = b == 1 ? &ExperimentConfig::bath1 : &ExperimentConfig::bath2;
        bool ExperimentConfig::*autod = b == 1 ? &ExperimentConfig::delta_auto_1 : &ExperimentConfig::delta_auto_2;
        const std::string sfx = "_" + std::to_string(b);
        const std::string which = "bath " + std::to_string(b);
        f.push_back(bath_double("T" + std::to_string(b), which + " temperature", bath, &BathSpec::temperature));
        f.push_back(bath_double("a0" + sfx, which + " coupling strength A0", bath, &BathSpec::a0));
        const std::string dname = "delta" + sfx;
        f.push_back({dname, which + " energy bandwidth; 0 = 10 x spectral range",
                     [bath, autod, dname](ExperimentConfig& c, std::string_view v) {
                         const double d = parse_double(dname, v);
                         c.*autod = d == 0.0;
                         if (d != 0.0) (c.*bath).delta = d;
                     },
                     [bath, autod](const ExperimentConfig& c) {
                         return c.*autod ? std::string("0") : format_double((c.*bath).delta);
                     }});
        const std::string kname = "q_kind" + sfx;
        f.push_back({kname, which + " surface operator: projector | random",
                     [bath, kname](ExperimentConfig& c, std::string_view v) {
                         (c.*bath).q_kind = parse_surface_recipe(kname, v);
                     },
                     [bath](const ExperimentConfig& c) { return std::string(to_string((c.*bath).q_kind)); }});
        f.push_back(bath_double("q_amplitude" + sfx, which + " projector amplitude", bath, &BathSpec::q_amplitude));
        f.push_back(bath_double("q_scale" + sfx, which + " random operator scale", bath, &BathSpec::q_scale));
        const std::string sname = "q_seed" + sfx;
        f.push_back({sname, which + " random operator seed",
                     [bath, sname](ExperimentConfig& c, std::string_view v) {
                         (c.*bath).q_seed = parse_integer<std::uint64_t>(sname, v);
                     },
                     [bath](const ExperimentConfig& c) { return std::to_string((c.*bath).q_seed); }});
    }

    f.push_back({"coupling", "bath-2 recipe: equal | similar | dissimilar",
                 [](ExperimentConfig& c, std::string_view v) { c.coupling = parse_coupling(v); },
                 [](const ExperimentConfig& c) { return std::string(to_string(c.coupling)); }});
    f.push_back(double_field("similar_ratio", "a in X1 = a X2 for the similar recipe",
                             &ExperimentConfig::similar_ratio));
    f.push_back({"t0_mode", "equilibrium reference temperature: auto | mean",
                 [](ExperimentConfig& c, std::string_view v) {
                     const std::string s = trim(v);
                     if (s != "auto" && s != "mean") bad_value("t0_mode", v);
                     c.t0_from_mean = s == "mean";
                 },
                 [](const ExperimentConfig& c) { return std::string(c.t0_from_mean ? "mean" : "auto"); }});
    f.push_back({"K_list", "block counts for scaling and strength sweeps",
                 [](ExperimentConfig& c, std::string_view v) {
                     c.K_list.clear();
                     for (const auto& item : split_list(v)) c.K_list.push_back(parse_integer<int>("K_list", item));
                 },
                 [](const ExperimentConfig& c) {
                     return join(c.K_list, [](int k) { return std::to_string(k); });
                 }});
    f.push_back({"dT_list", "half temperature differences as fractions of (T1+T2)/2",
                 [](ExperimentConfig& c, std::string_view v) {
                     c.dT_list.clear();
                     for (const auto& item : split_list(v)) c.dT_list.push_back(parse_double("dT_list", item));
                 },
                 [](const ExperimentConfig& c) { return join(c.dT_list, format_double); }});
    f.push_back({"grid_points", "energy grid size",
                 [](ExperimentConfig& c, std::string_view v) { c.grid_points = parse_integer<int>("grid_points", v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.grid_points); }});
    f.push_back(double_field("grid_span", "energy grid half-width in units of lambda'", &ExperimentConfig::grid_span));
    f.push_back(double_field("eta", "Lorentzian regularization; 0 = experiment default", &ExperimentConfig::eta));
    f.push_back({"realizations", "ensemble size",
                 [](ExperimentConfig& c, std::string_view v) {
                     c.realizations = parse_integer<int>("realizations", v);
                 },
                 [](const ExperimentConfig& c) { return std::to_string(c.realizations); }});
    f.push_back({"seed", "master seed",
                 [](ExperimentConfig& c, std::string_view v) {
                     c.seed = parse_integer<std::uint64_t>("seed", v);
                     c.chain.seed = c.seed;
                 },
                 [](const ExperimentConfig& c) { return std::to_string(c.seed); }});
    f.push_back({"out_dir", "output directory",
                 [](ExperimentConfig& c, std::string_view v) { c.out_dir = trim(v); },
                 [](const ExperimentConfig& c) { return c.out_dir; }});
    f.push_back({"formats", "output formats: csv, json",
                 [](ExperimentConfig& c, std::string_view v) {
                     c.formats = split_list(v);
                     for (const auto& x : c.formats) {
                         if (x != "csv" && x != "json") bad_value("formats", v);
                     }
                 },
                 [](const ExperimentConfig& c) { return join(c.formats, [](const std::string& s) { return s; }); }});
    f.push_back({"threads", "worker threads; 0 = all cores",
                 [](ExperimentConfig& c, std::string_view v) { c.threads = parse_integer<int>("threads", v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.threads); }});
    f.push_back(double_field("class_tol", "relative tolerance for coupling classification", &ExperimentConfig::class_tol));
    return f;
}

const std::vector<Field>& fields() {
    static const std::vector<Field> all = make_fields();
    return all;
}

const Field& find_field(std::string_view name) {
    for (const auto& f : fields()) {
        if (f.name == name) return f;
    }
    throw ParameterError("config: unknown field '" + std::string(name) + "'");
}

// ---- execution helpers ---------------------------------------------------

int worker_count(int requested, int tasks) {
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    return std::clamp(n, 1, std::max(1, tasks));
}

// Runs fn(i) for i in [0, count). Results must be written by index, so the
// outcome does not depend on scheduling. The first exception (lowest index)
// is rethrown.
void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    const int workers = worker_count(threads, count);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<int> next{0};
        std::atomic<bool> failed{false};
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) {
            pool.emplace_back([&] {
                for (int i = next++; i < count && !failed; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[static_cast<std::size_t>(i)] = std::current_exception();
                        failed = true;
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

// Collects library warnings into the record while a run is active.
class EventLog {
public:
    EventLog() {
        previous_ = set_warning_handler([this](std::string_view msg) {
            {
                std::lock_guard lock(mutex_);
                events_.emplace_back(msg);
            }
            if (previous_) previous_(msg);
        });
    }
    ~EventLog() { set_warning_handler(previous_); }
    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    void add(std::string msg) {
        std::lock_guard lock(mutex_);
        events_.push_back(std::move(msg));
    }
    std::vector<std::string> take() {
        std::lock_guard lock(mutex_);
        // Worker threads append in scheduling order.
        std::sort(events_.begin(), events_.end());
        return std::move(events_);
    }

private:
    std::mutex mutex_;
    std::vector<std::string> events_;
    WarningHandler previous_;
};

struct Instance {
    SystemSpectrum spectrum;
    CouplingKernel x1;
    CouplingKernel x2;
};

ChainParams chain_for(const ExperimentConfig& c, int K) {
    ChainParams p = c.chain;
    p.K = K;
    p.seed = c.seed;
    return p;
}

std::uint64_t realization_seed(const ExperimentConfig& c, int K, int r, int attempt) {
    return derive_seed(c.seed, {static_cast<std::uint64_t>(K), static_cast<std::uint64_t>(r),
                                static_cast<std::uint64_t>(attempt)});
}

Instance build_instance(const ExperimentConfig& c, int K, std::uint64_t stream_seed) {
    const ChainParams params = chain_for(c, K);
    RngStream rng(stream_seed);
    const ChainHamiltonian h = sample_chain_hamiltonian(params, rng);
    Instance inst{diagonalize_chain(h), {}, {}};
    const double range = spectral_range_estimate(h);

    BathSpec b1 = c.bath1;
    b1.end = ChainEnd::Left;
    if (c.delta_auto_1) b1.delta = 10.0 * range;
    const SurfaceOperator q1 = build_surface_operator(b1, params);
    inst.x1 = eigenbasis_coupling(q1, b1, inst.spectrum);

    switch (c.coupling) {
        case CouplingRecipe::Equal: {
            BathSpec b2 = b1;
            b2.temperature = c.bath2.temperature;
            inst.x2 = {inst.x1.x, b2};
            break;
        }
        case CouplingRecipe::Similar: {
            BathSpec b2 = b1;
            b2.temperature = c.bath2.temperature;
            b2.a0 = b1.a0 / c.similar_ratio;
            inst.x2 = eigenbasis_coupling(q1, b2, inst.spectrum);
            break;
        }
        case CouplingRecipe::Dissimilar: {
            BathSpec b2 = c.bath2;
            b2.end = ChainEnd::Right;
            if (c.delta_auto_2) b2.delta = 10.0 * range;
            inst.x2 = eigenbasis_coupling(build_surface_operator(b2, params), b2, inst.spectrum);
            break;
        }
    }
    return inst;
}

// Builds an instance, resampling with a derived seed after a numerical
// failure of `use`; gives up after three retries.
template <class Use>
void with_instance(const ExperimentConfig& c, int K, int r, EventLog& log, Use&& use) {
    constexpr int kRetries = 3;
    for (int attempt = 0;; ++attempt) {
        try {
            use(build_instance(c, K, realization_seed(c, K, r, attempt)));
            return;
        } catch (const NumericalError& e) {
            std::ostringstream os;
            os << "K=" << K << " realization " << r << " attempt " << attempt << " failed: " << e.what();
            log.add(os.str());
            if (attempt >= kRetries) throw;
        }
    }
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? kNaN : s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
    if (v.size() < 2) return kNaN;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

// Log-log slope, NaN (plus an event) when the data cannot be fitted.
LineFit loglog_or_nan(const std::vector<double>& x, const std::vector<double>& y, const std::string& what,
                      EventLog& log) {
    try {
        return fit_loglog(x, y);
    } catch (const FitError& e) {
        log.add(what + ": " + e.what());
        LineFit f;
        f.slope = f.intercept = f.residual = kNaN;
        return f;
    }
}

void add(RunRecord& r, std::string key, double value) { r.summary.emplace_back(std::move(key), value); }

double tag_code(CouplingTag t) {
    switch (t) {
        case CouplingTag::Equal: return 0.0;
        case CouplingTag::Similar: return 1.0;
        case CouplingTag::Dissimilar: return 2.0;
    }
    return kNaN;
}

RunRecord start_record(const ExperimentConfig& config, ExperimentKind kind) {
    ExperimentConfig c = config;
    c.experiment = kind;
    c.chain.seed = c.seed;
    RunRecord r;
    r.config = c;
    r.table.columns = table_columns(kind);
    return r;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> energy_grid(const ExperimentConfig& c) {
    const double lp = c.chain.bulk_lambda();
    return linspace(-c.grid_span * lp, c.grid_span * lp, c.grid_points);
}

}  // namespace

// ---- public API ----------------------------------------------------------

std::string_view to_string(ExperimentKind kind) noexcept {
    switch (kind) {
        case ExperimentKind::Scaling: return "scaling";
        case ExperimentKind::Equilibrium: return "equilibrium";
        case ExperimentKind::Linearity: return "linearity";
        case ExperimentKind::Spectral: return "spectral";
        case ExperimentKind::Strength: return "strength";
    }
    return "scaling";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
    for (auto k : {ExperimentKind::Scaling, ExperimentKind::Equilibrium, ExperimentKind::Linearity,
                   ExperimentKind::Spectral, ExperimentKind::Strength}) {
        if (to_string(k) == name) return k;
    }
    throw ParameterError("config: unknown experiment '" + std::string(name) + "'");
}

ExperimentConfig::ExperimentConfig() {
    bath1.temperature = 0.8;
    bath2.temperature = 1.2;
    bath1.q_seed = 1;
    bath2.q_seed = 2;
    chain.seed = seed;
}

std::vector<std::string> ExperimentConfig::validate() const {
    std::vector<std::string> warnings = chain.validate();
    auto fail = [](const std::string& what) { throw ParameterError("config: " + what); };

    if (realizations < 1) fail("realizations must be >= 1");
    if (threads < 0) fail("threads must be >= 0");
    BathSpec b1 = bath1, b2 = bath2;
    if (delta_auto_1) b1.delta = 1.0;
    if (delta_auto_2) b2.delta = 1.0;
    b1.validate();
    b2.validate();
    if (!(bath2.temperature > bath1.temperature)) fail("T2 must exceed T1");
    if (!(similar_ratio > 0.0)) fail("similar_ratio must be > 0");
    if (!(class_tol > 0.0)) fail("class_tol must be > 0");
    if (!(eta >= 0.0)) fail("eta must be >= 0");
    if (grid_points < 5) fail("grid_points must be >= 5");
    if (!(grid_span > 0.0) || grid_span > 3.0) fail("grid_span must lie in (0, 3]");
    for (const auto& f : formats) {
        if (f != "csv" && f != "json") fail("unknown output format '" + f + "'");
    }

    const bool sweeps_K = experiment == ExperimentKind::Scaling || experiment == ExperimentKind::Strength;
    if (sweeps_K) {
        if (K_list.empty()) fail("K_list is empty");
        for (int k : K_list) {
            ChainParams p = chain;
            p.K = k;
            p.validate();
        }
    }
    if (experiment == ExperimentKind::Scaling) {
        if (std::set<int>(K_list.begin(), K_list.end()).size() < 3) fail("scaling needs at least 3 distinct K");
        if (coupling == CouplingRecipe::Dissimilar) {
            warnings.emplace_back("scaling with dissimilar couplings: the headline conductance averages two forms");
        }
    }
    if (experiment == ExperimentKind::Equilibrium || experiment == ExperimentKind::Linearity) {
        if (dT_list.empty()) fail("dT_list is empty");
        for (double f : dT_list) {
            if (!(f > 0.0) || !(f < 1.0)) fail("dT_list entries must lie in (0, 1)");
        }
        const auto [lo, hi] = std::minmax_element(dT_list.begin(), dT_list.end());
        if (experiment == ExperimentKind::Equilibrium && *hi < 8.0 * *lo * (1.0 - 1e-12)) {
            fail("dT_list must span at least a factor 8");
        }
        if (experiment == ExperimentKind::Linearity && dT_list.size() < 4) fail("linearity needs >= 4 dT values");
    }
    if ((experiment == ExperimentKind::Spectral || experiment == ExperimentKind::Strength) && realizations < 10) {
        fail("spectral experiments need at least 10 realizations");
    }

    // Validity of the master-equation picture: T0 well above the level spacing.
    const double t0 = 0.5 * (bath1.temperature + bath2.temperature);
    int kmax = chain.K;
    if (sweeps_K) kmax = *std::min_element(K_list.begin(), K_list.end());
    ChainParams p = chain;
    p.K = kmax;
    if (t0 < 10.0 * p.mean_level_spacing()) {
        std::ostringstream os;
        os << "T0 = " << t0 << " is not much larger than the mean level spacing " << p.mean_level_spacing();
        warnings.push_back(os.str());
    }
    return warnings;
}

const std::vector<std::string>& config_field_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& f : fields()) n.push_back(f.name);
        return n;
    }();
    return names;
}

std::string_view config_field_help(std::string_view name) { return find_field(name).help; }

void set_config_field(ExperimentConfig& config, std::string_view name, std::string_view value) {
    find_field(name).set(config, value);
}

std::string get_config_field(const ExperimentConfig& config, std::string_view name) {
    return find_field(name).get(config);
}

void load_config(ExperimentConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot read " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError("config: " + path + ": " + e.what());
    }
    if (!doc.is_object()) throw ParameterError("config: " + path + " must hold a JSON object");

    auto scalar = [](const nlohmann::json& v) -> std::string {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
        if (v.is_number_float()) return format_double(v.get<double>());
        throw ParameterError("config: unsupported value " + v.dump());
    };
    for (const auto& [key, value] : doc.items()) {
        std::string text;
        if (value.is_array()) {
            for (std::size_t i = 0; i < value.size(); ++i) text += (i ? "," : "") + scalar(value[i]);
        } else {
            text = scalar(value);
        }
        set_config_field(config, key, text);
    }
}

double RunRecord::summary_value(std::string_view key) const {
    for (const auto& [k, v] : summary) {
        if (k == key) return v;
    }
    throw std::out_of_range("summary key not found: " + std::string(key));
}

std::vector<std::string> table_columns(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Scaling: return {"K", "realization", "C", "I", "T0", "alpha", "numerator", "Z"};
        case ExperimentKind::Equilibrium: return {"dT", "err_exact_vs_gibbs", "err_pert_vs_exact"};
        case ExperimentKind::Linearity:
            return {"dT", "I_exact", "I_bath1", "C", "C_1", "C_2", "T0", "alpha", "mismatch", "flow_mismatch"};
        case ExperimentKind::Spectral: return {"E", "rho_pastur", "rho_mc", "sf_analytic", "sf_mc"};
        case ExperimentKind::Strength:
            return {"K",         "width_mc",       "width_analytic", "width_closed_form", "center_mc",
                    "center_analytic", "weight_mc", "rho0_pastur",    "rho0_mc"};
    }
    return {};
}

RunRecord run_scaling_experiment(const ExperimentConfig& config) {
    const auto clock = std::chrono::steady_clock::now();
    RunRecord rec = start_record(config, ExperimentKind::Scaling);
    const ExperimentConfig& c = rec.config;
    EventLog log;
    for (auto& w : c.validate()) log.add(w);

    const int R = c.realizations;
    const int nk = static_cast<int>(c.K_list.size());
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(nk * R));
    LinearResponseOptions opts;
    opts.class_tol = c.class_tol;

    parallel_for(nk * R, c.threads, [&](int idx) {
        const int K = c.K_list[static_cast<std::size_t>(idx / R)];
        const int r = idx % R;
        with_instance(c, K, r, log, [&](const Instance& inst) {
            const TransportResult t = conductance_linear_response(inst.spectrum, inst.x1, inst.x2,
                                                                  c.bath1.temperature, c.bath2.temperature, opts);
            rows[static_cast<std::size_t>(idx)] = {static_cast<double>(K), static_cast<double>(r), t.conductance,
                                                   t.current, t.t0, t.alpha, t.numerator, t.partition};
        });
    });
    rec.table.rows = rows;

    std::vector<double> ks, mc, mn, mz;
    for (int i = 0; i < nk; ++i) {
        std::vector<double> cs, ns, zs;
        for (int r = 0; r < R; ++r) {
            const auto& row = rows[static_cast<std::size_t>(i * R + r)];
            cs.push_back(row[2]);
            ns.push_back(row[6]);
            zs.push_back(row[7]);
        }
        const int K = c.K_list[static_cast<std::size_t>(i)];
        const std::string tag = "_K" + std::to_string(K);
        ks.push_back(K);
        mc.push_back(mean_of(cs));
        mn.push_back(mean_of(ns));
        mz.push_back(mean_of(zs));
        add(rec, "mean_C" + tag, mc.back());
        add(rec, "stderr_C" + tag, stderr_of(cs));
        add(rec, "mean_numerator" + tag, mn.back());
        add(rec, "mean_Z" + tag, mz.back());
    }
    const LineFit fc = loglog_or_nan(ks, mc, "slope_C", log);
    const LineFit fn = loglog_or_nan(ks, mn, "slope_numerator", log);
    const LineFit fz = loglog_or_nan(ks, mz, "slope_Z", log);
    add(rec, "slope_C", fc.slope);
    add(rec, "slope_C_stderr", std::sqrt(fc.covariance(0, 0)));
    add(rec, "intercept_C", fc.intercept);
    add(rec, "slope_numerator", fn.slope);
    add(rec, "slope_numerator_stderr", std::sqrt(fn.covariance(0, 0)));
    add(rec, "slope_Z", fz.slope);
    add(rec, "slope_Z_stderr", std::sqrt(fz.covariance(0, 0)));

    rec.events = log.take();
    rec.wall_seconds = elapsed(clock);
    return rec;
}

RunRecord run_equilibrium_experiment(const ExperimentConfig& config) {
    const auto clock = std::chrono::steady_clock::now();
    RunRecord rec = start_record(config, ExperimentKind::Equilibrium);
    const ExperimentConfig& c = rec.config;
    EventLog log;
    for (auto& w : c.validate()) log.add(w);

    const double tc = 0.5 * (c.bath1.temperature + c.bath2.temperature);
    std::vector<double> dts, e1, e2;
    double bracket_rel = 0.0;
    CouplingClass klass;
    double t0_first = kNaN, alpha_first = kNaN;

    with_instance(c, c.chain.K, 0, log, [&](const Instance& inst) {
        rec.table.rows.clear();
        dts.clear();
        e1.clear();
        e2.clear();
        bracket_rel = 0.0;
        const Vector& E = inst.spectrum.energies;
        klass = classify_couplings(inst.x1.x, inst.x2.x, c.class_tol);
        const PerturbationProvider provider = [&](double t0) {
            return std::pair{perturbation_objects(inst.x1, t0, inst.spectrum),
                             perturbation_objects(inst.x2, t0, inst.spectrum)};
        };
        for (double f : c.dT_list) {
            const double dT = f * tc;
            const double t1 = tc - dT;
            const double t2 = tc + dT;
            const SteadyState exact = stationary_exact(rate_matrix(inst.x1, t1, inst.spectrum),
                                                       rate_matrix(inst.x2, t2, inst.spectrum));
            double t0 = tc;
            double alpha = 0.5;
            if (!c.t0_from_mean) {
                const ReferenceTemperatures ref = reference_temperature(klass, t1, t2, provider);
                t0 = ref.bath1.t0;
                alpha = ref.bath1.alpha;
            }
            const auto [p1, p2] = provider(t0);
            const RelaxationSpectrum relax = relaxation_spectrum(p1, p2);
            const BracketSums s = bracket_sums(relax, p1.a, p2.a);
            bracket_rel = std::max(bracket_rel,
                                   std::abs(bath1_bracket(s, alpha)) / (std::abs(s.s11) + std::abs(s.s12)));
            const Vector dp = linearized_solve(relax, p1.a, p2.a, alpha, dT);
            const Vector pert = occupation_probabilities(E, t0, dp);

            const double err_gibbs = (exact.p - gibbs(E, t0)).cwiseAbs().maxCoeff();
            const double err_pert = (exact.p - pert).cwiseAbs().maxCoeff();
            rec.table.rows.push_back({dT, err_gibbs, err_pert});
            dts.push_back(dT);
            e1.push_back(err_gibbs);
            e2.push_back(err_pert);
            if (std::isnan(t0_first)) {
                t0_first = t0;
                alpha_first = alpha;
            }
        }
    });

    add(rec, "slope_exact_vs_gibbs", loglog_or_nan(dts, e1, "slope_exact_vs_gibbs", log).slope);
    add(rec, "slope_pert_vs_exact", loglog_or_nan(dts, e2, "slope_pert_vs_exact", log).slope);
    add(rec, "coupling_class", tag_code(klass.tag));
    add(rec, "coupling_ratio", klass.ratio);
    add(rec, "coupling_fit_residual", klass.fit_residual);
    add(rec, "t0", t0_first);
    add(rec, "alpha", alpha_first);
    add(rec, "bracket1_rel_max", bracket_rel);

    rec.events = log.take();
    rec.wall_seconds = elapsed(clock);
    return rec;
}

RunRecord run_linearity_experiment(const ExperimentConfig& config) {
    const auto clock = std::chrono::steady_clock::now();
    RunRecord rec = start_record(config, ExperimentKind::Linearity);
    const ExperimentConfig& c = rec.config;
    EventLog log;
    for (auto& w : c.validate()) log.add(w);

    const double tc = 0.5 * (c.bath1.temperature + c.bath2.temperature);
    LinearResponseOptions opts;
    opts.class_tol = c.class_tol;

    std::vector<double> dts, currents, mismatch;
    double flow_max = 0.0, spread_max = 0.0, c_small = kNaN, small = kNaN;
    CouplingClass klass;

    with_instance(c, c.chain.K, 0, log, [&](const Instance& inst) {
        rec.table.rows.clear();
        dts.clear();
        currents.clear();
        mismatch.clear();
        flow_max = spread_max = 0.0;
        small = std::numeric_limits<double>::infinity();
        const Vector& E = inst.spectrum.energies;
        for (double f : c.dT_list) {
            const double dT = f * tc;
            const double t1 = tc - dT;
            const double t2 = tc + dT;
            const RateMatrix w1 = rate_matrix(inst.x1, t1, inst.spectrum);
            const RateMatrix w2 = rate_matrix(inst.x2, t2, inst.spectrum);
            const SteadyState exact = stationary_exact(w1, w2);
            const double in2 = heat_current_exact(E, w2, exact.p);
            const double out1 = bath1_outflow(E, w1, exact.p);
            const double flow = std::abs(in2 - out1) / std::max(std::abs(in2), std::abs(out1));
            const TransportResult t = conductance_linear_response(E, inst.x1, inst.x2, t1, t2, opts);
            const double mis = std::abs(in2 / dT - t.conductance);
            rec.table.rows.push_back(
                {dT, in2, out1, t.conductance, t.conductance_1, t.conductance_2, t.t0, t.alpha, mis, flow});
            dts.push_back(dT);
            currents.push_back(in2);
            mismatch.push_back(mis);
            flow_max = std::max(flow_max, flow);
            spread_max = std::max(spread_max, t.form_spread);
            klass = t.klass;
            if (dT < small) {
                small = dT;
                c_small = t.conductance;
            }
        }
    });

    const LinearityFit lf = fourier_linearity_fit(dts, currents);
    add(rec, "fit_C", lf.conductance);
    add(rec, "fit_q", lf.curvature);
    add(rec, "fit_residual", lf.residual);
    add(rec, "C_formula", c_small);
    add(rec, "fit_vs_formula_rel", std::abs(lf.conductance - c_small) / std::abs(c_small));
    add(rec, "mismatch_slope", loglog_or_nan(dts, mismatch, "mismatch_slope", log).slope);
    add(rec, "flow_mismatch_max", flow_max);
    add(rec, "form_spread_max", spread_max);
    add(rec, "coupling_class", tag_code(klass.tag));
    add(rec, "coupling_ratio", klass.ratio);
    add(rec, "coupling_fit_residual", klass.fit_residual);

    rec.events = log.take();
    rec.wall_seconds = elapsed(clock);
    return rec;
}

namespace {

// Per-realization spectral data, reduced so large ensembles stay small.
struct SpectralSample {
    std::vector<double> rho;       ///< smoothed level density on the grid
    std::vector<double> strength;  ///< surface-site strength function on the grid
    double rho0 = 0.0;             ///< density at E = 0 with the fixed rho0 width
    double surface_weight = 0.0;   ///< sum_m |<m|site>|^2
};

SpectralSample sample_spectral(const ExperimentConfig& c, int K, int r, const std::vector<double>& grid, double eta,
                               double eta0, EventLog& log) {
    SpectralSample out;
    constexpr int kRetries = 3;
    const ChainParams params = chain_for(c, K);
    for (int attempt = 0;; ++attempt) {
        try {
            RngStream rng(realization_seed(c, K, r, attempt));
            const SystemSpectrum s = diagonalize_chain(sample_chain_hamiltonian(params, rng));
            out.rho = smoothed_level_density(s, grid, eta);
            const Eigen::ArrayXd wts = s.modes.row(0).array().square().transpose();
            out.surface_weight = wts.sum();
            out.strength.resize(grid.size());
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const Eigen::ArrayXd d = s.energies.array() - grid[i];
                out.strength[i] = (wts * (eta / std::numbers::pi) / (d.square() + eta * eta)).sum();
            }
            out.rho0 = ((eta0 / std::numbers::pi) / (s.energies.array().square() + eta0 * eta0)).sum();
            return out;
        } catch (const NumericalError& e) {
            std::ostringstream os;
            os << "K=" << K << " realization " << r << " attempt " << attempt << " failed: " << e.what();
            log.add(os.str());
            if (attempt >= kRetries) throw;
        }
    }
}

struct EnsembleAverage {
    std::vector<double> rho;
    std::vector<double> strength;
    double rho0 = 0.0;
    double max_weight_error = 0.0;
};

EnsembleAverage spectral_ensemble(const ExperimentConfig& c, int K, const std::vector<double>& grid, double eta,
                                  double eta0, EventLog& log) {
    const int R = c.realizations;
    std::vector<SpectralSample> samples(static_cast<std::size_t>(R));
    parallel_for(R, c.threads, [&](int r) {
        samples[static_cast<std::size_t>(r)] = sample_spectral(c, K, r, grid, eta, eta0, log);
    });
    EnsembleAverage avg{std::vector<double>(grid.size(), 0.0), std::vector<double>(grid.size(), 0.0), 0.0, 0.0};
    const double inv = 1.0 / R;
    for (const auto& s : samples) {  // fixed order keeps the sums reproducible
        for (std::size_t i = 0; i < grid.size(); ++i) {
            avg.rho[i] += inv * s.rho[i];
            avg.strength[i] += inv * s.strength[i];
        }
        avg.rho0 += inv * s.rho0;
        avg.max_weight_error = std::max(avg.max_weight_error, std::abs(s.surface_weight - 1.0));
    }
    return avg;
}

double rho0_pastur(const ChainParams& p, double eta0) {
    const auto g = pastur_point(p.K, p.lambda, p.w, Complex{0.0, eta0});
    Complex sum = 0.0;
    for (const auto& x : g) sum += x;
    return -static_cast<double>(p.N) / std::numbers::pi * sum.imag();
}

}  // namespace

RunRecord run_spectral_experiment(const ExperimentConfig& config) {
    const auto clock = std::chrono::steady_clock::now();
    RunRecord rec = start_record(config, ExperimentKind::Spectral);
    const ExperimentConfig& c = rec.config;
    EventLog log;
    for (auto& w : c.validate()) log.add(w);

    const ChainParams params = chain_for(c, c.chain.K);
    const double lp = params.bulk_lambda();
    const std::vector<double> grid = energy_grid(c);
    const double eta = c.eta > 0.0 ? c.eta : 2.0 * params.mean_level_spacing();
    const double eta0 = 0.05 * lp;

    const GreenProfile profile = pastur_solve(params, grid, eta);
    const std::vector<double> rho_p = average_level_density(profile, params.N);
    const EnsembleAverage mc = spectral_ensemble(c, params.K, grid, eta, eta0, log);

    std::vector<double> sf_a(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Complex z{grid[i], eta};
        const Complex g11 = 1.0 / (z - params.E1 - params.v * params.v * params.N *
                                                      profile.g_blocks(static_cast<Eigen::Index>(i), 0));
        sf_a[i] = -g11.imag() / std::numbers::pi;
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        rec.table.rows.push_back({grid[i], rho_p[i], mc.rho[i], sf_a[i], mc.strength[i]});
    }

    // Bulk agreement over |E| <= 1.5 lambda'.
    double num = 0.0, den = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::abs(grid[i]) > 1.5 * lp) continue;
        const double d = mc.rho[i] - rho_p[i];
        num += d * d;
        den += rho_p[i] * rho_p[i];
        worst = std::max(worst, std::abs(d) / rho_p[i]);
    }
    const double states = static_cast<double>(params.dimension());
    add(rec, "eta", eta);
    add(rec, "bulk_rel_rms", std::sqrt(num / den));
    add(rec, "bulk_max_rel_dev", worst);
    add(rec, "weight_pastur", trapezoid(grid, rho_p) / states);
    add(rec, "weight_mc", trapezoid(grid, mc.rho) / states);
    add(rec, "sf_weight_analytic", trapezoid(grid, sf_a));
    add(rec, "sf_weight_mc", trapezoid(grid, mc.strength));
    add(rec, "surface_weight_max_error", mc.max_weight_error);
    add(rec, "rho0_pastur", rho0_pastur(params, eta0));
    add(rec, "rho0_mc", mc.rho0);
    add(rec, "pastur_max_residual", profile.max_residual);
    add(rec, "pastur_newton_points", profile.newton_polished);
    try {
        const StrengthFunction fa = fitted_strength_function(grid, sf_a, eta);
        const StrengthFunction fm = fitted_strength_function(grid, mc.strength, eta);
        add(rec, "width_analytic", fa.width);
        add(rec, "width_mc", fm.width);
        add(rec, "center_analytic", fa.center);
        add(rec, "center_mc", fm.center);
    } catch (const FitError& e) {
        log.add(std::string("strength-function fit: ") + e.what());
    }

    rec.events = log.take();
    rec.wall_seconds = elapsed(clock);
    return rec;
}

RunRecord run_strength_experiment(const ExperimentConfig& config) {
    const auto clock = std::chrono::steady_clock::now();
    RunRecord rec = start_record(config, ExperimentKind::Strength);
    const ExperimentConfig& c = rec.config;
    EventLog log;
    for (auto& w : c.validate()) log.add(w);

    const double lp = c.chain.bulk_lambda();
    const std::vector<double> grid = energy_grid(c);
    // One width for every K, so smoothing does not masquerade as K dependence.
    const double eta = c.eta > 0.0 ? c.eta : 0.02 * lp;
    const double eta0 = 0.05 * lp;

    std::vector<double> ks, wmc, wan, r0p, r0m;
    for (int K : c.K_list) {
        const ChainParams params = chain_for(c, K);
        const GreenProfile profile = pastur_solve(params, grid, eta);
        const StrengthFunction sa = strength_function_analytic(profile);
        const EnsembleAverage mc = spectral_ensemble(c, K, grid, eta, eta0, log);
        const StrengthFunction sm = fitted_strength_function(grid, mc.strength, eta);
        const double closed = params.v * params.v * params.N / lp;
        const double rp = rho0_pastur(params, eta0);
        rec.table.rows.push_back({static_cast<double>(K), sm.width, sa.width, closed, sm.center, sa.center,
                                  sm.weight, rp, mc.rho0});
        ks.push_back(K);
        wmc.push_back(sm.width);
        wan.push_back(sa.width);
        r0p.push_back(rp);
        r0m.push_back(mc.rho0);
    }

    auto spread = [](const std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return (*hi - *lo) / mean_of(v);
    };
    double dev = 0.0;
    for (std::size_t i = 0; i < wmc.size(); ++i) dev = std::max(dev, std::abs(wmc[i] / wan[i] - 1.0));
    add(rec, "eta", eta);
    add(rec, "eta_rho0", eta0);
    add(rec, "width_spread_mc", spread(wmc));
    add(rec, "width_spread_analytic", spread(wan));
    add(rec, "width_mc_vs_analytic_max", dev);
    add(rec, "rho0_slope_pastur", loglog_or_nan(ks, r0p, "rho0_slope_pastur", log).slope);
    add(rec, "rho0_slope_mc", loglog_or_nan(ks, r0m, "rho0_slope_mc", log).slope);

    rec.events = log.take();
    rec.wall_seconds = elapsed(clock);
    return rec;
}

RunRecord run_experiment(const ExperimentConfig& config) {
    switch (config.experiment) {
        case ExperimentKind::Scaling: return run_scaling_experiment(config);
        case ExperimentKind::Equilibrium: return run_equilibrium_experiment(config);
        case ExperimentKind::Linearity: return run_linearity_experiment(config);
        case ExperimentKind::Spectral: return run_spectral_experiment(config);
        case ExperimentKind::Strength: return run_strength_experiment(config);
    }
    throw ParameterError("unknown experiment");
}

}  // namespace heatlab
