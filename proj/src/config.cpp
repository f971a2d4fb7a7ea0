#include "seqdesign/config.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>

namespace seqdesign {

namespace {

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

long long to_integer(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) {
        throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + value + "'");
    }
    return v;
}

double to_real(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) {
        throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + value + "'");
    }
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw std::invalid_argument("config: key '" + key + "' expects true or false, got '" + value + "'");
}

int suite_size(const std::string& suite) { return static_cast<int>(builtin_suite(suite).candidates.size()); }

std::vector<int> parse_true_models(const std::string& value, const std::string& suite) {
    const int k = suite_size(suite);
    std::vector<int> out;
    if (value == "all") {
        for (int j = 0; j < k; ++j) out.push_back(j);
        return out;
    }
    for (const auto& item : split_list(value)) {
        const std::string digits = (item.size() > 1 && (item[0] == 'M' || item[0] == 'm')) ? item.substr(1) : item;
        const long long v = to_integer("true_model", digits);
        if (v < 1 || v > k) {
            throw std::invalid_argument("config: key 'true_model' out of range: '" + item + "' (suite has " +
                                        std::to_string(k) + " models)");
        }
        out.push_back(static_cast<int>(v - 1));
    }
    if (out.empty()) throw std::invalid_argument("config: key 'true_model' is empty");
    return out;
}

std::string eval_name(EvalMode mode) { return mode == EvalMode::gof_filtered ? "gof-filtered" : "plain-bic"; }

std::string reference_name(GofReference r) {
    return r == GofReference::chi_square_residual ? "chi-square" : "lack-of-fit-f";
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

}  // namespace

std::string model_label(int index) { return "M" + std::to_string(index + 1); }

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& raw) {
    const std::string value = trim(raw);
    SimConfig& s = config.sim;
    try {
        if (key == "suite") {
            const int before = suite_size(s.suite);
            builtin_suite(value);  // validates the id
            s.suite = value;
            if (suite_size(value) != before) {
                config.true_models = {0};
                s.true_index = 0;
                s.n_per_arm.clear();
            }
        } else if (key == "true_model") {
            config.true_models = parse_true_models(value, s.suite);
            s.true_index = config.true_models.front();
        } else if (key == "criterion") {
            s.criterion = Criterion::parse(value);
        } else if (key == "T") {
            s.T = static_cast<int>(to_integer(key, value));
        } else if (key == "n_t") {
            s.n_t = static_cast<int>(to_integer(key, value));
        } else if (key == "n_per_arm") {
            s.n_per_arm.clear();
            for (const auto& item : split_list(value)) s.n_per_arm.push_back(static_cast<int>(to_integer(key, item)));
        } else if (key == "budget") {
            s.budget = static_cast<int>(to_integer(key, value));
        } else if (key == "rho") {
            s.rho = RhoSchedule::parse(value);
        } else if (key == "eval") {
            if (value == "plain-bic") s.eval = EvalMode::plain_bic;
            else if (value == "gof-filtered") s.eval = EvalMode::gof_filtered;
            else throw std::invalid_argument("expected plain-bic or gof-filtered");
        } else if (key == "gof_level") {
            s.gof_level = to_real(key, value);
        } else if (key == "gof_reference") {
            if (value == "lack-of-fit-f") s.gof_reference = GofReference::lack_of_fit_f;
            else if (value == "chi-square") s.gof_reference = GofReference::chi_square_residual;
            else throw std::invalid_argument("expected lack-of-fit-f or chi-square");
        } else if (key == "pretest_n") {
            s.pretest_n = static_cast<int>(to_integer(key, value));
        } else if (key == "replications") {
            s.replications = static_cast<int>(to_integer(key, value));
        } else if (key == "seed") {
            const long long v = to_integer(key, value);
            if (v < 0) throw std::invalid_argument("seed must be nonnegative");
            s.seed = static_cast<std::uint64_t>(v);
        } else if (key == "comparison_designs") {
            s.comparison_designs = split_list(value);
        } else if (key == "comparison_accuracy") {
            s.comparison_accuracy = to_bool(key, value);
        } else if (key == "threads") {
            s.threads = static_cast<int>(to_integer(key, value));
        } else {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    } catch (const std::invalid_argument& e) {
        const std::string what = e.what();
        if (what.rfind("config:", 0) == 0) throw;
        throw std::invalid_argument("config: bad value for key '" + key + "': " + what);
    }
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " + std::to_string(number) + " is not 'key = value'");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        try {
            if (key == "preset") {
                base = preset_config(trim(std::string_view(line).substr(eq + 1)));
                continue;
            }
            apply_setting(base, key, line.substr(eq + 1));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string(e.what()) + " (line " + std::to_string(number) + ")");
        }
    }
    base.sim.true_index = base.true_models.front();
    for (int t : base.true_models) {
        SimConfig probe = base.sim;
        probe.true_index = t;
        probe.validate();
    }
    return base;
}

std::string config_to_text(const ExperimentConfig& c) {
    const SimConfig& s = c.sim;
    std::ostringstream os;
    os.precision(17);
    std::vector<std::string> trues;
    for (int t : c.true_models) trues.push_back(model_label(t));
    std::vector<std::string> arms;
    for (int v : s.n_per_arm) arms.push_back(std::to_string(v));
    os << "suite = " << s.suite << '\n';
    os << "true_model = " << join(trues) << '\n';
    os << "criterion = " << s.criterion.name() << '\n';
    os << "T = " << s.T << '\n';
    os << "n_t = " << s.n_t << '\n';
    if (!arms.empty()) os << "n_per_arm = " << join(arms) << '\n';
    os << "budget = " << s.budget << '\n';
    os << "rho = " << s.rho.name() << '\n';
    os << "eval = " << eval_name(s.eval) << '\n';
    os << "gof_level = " << s.gof_level << '\n';
    os << "gof_reference = " << reference_name(s.gof_reference) << '\n';
    os << "pretest_n = " << s.pretest_n << '\n';
    os << "replications = " << s.replications << '\n';
    os << "seed = " << s.seed << '\n';
    if (!s.comparison_designs.empty()) os << "comparison_designs = " << join(s.comparison_designs) << '\n';
    os << "comparison_accuracy = " << (s.comparison_accuracy ? "true" : "false") << '\n';
    os << "threads = " << s.threads << '\n';
    return os.str();
}

std::vector<std::string> preset_names() { return {"fig1-snr375", "fig1-snr135", "robust-512", "multivar-gof"}; }

ExperimentConfig preset_config(std::string name) {
    const std::string prefix = "dose-response-";
    if (name.rfind(prefix, 0) == 0) name = name.substr(prefix.size());
    ExperimentConfig c;
    c.preset = name;
    SimConfig& s = c.sim;
    if (name == "fig1-snr375" || name == "fig1-snr135") {
        s.suite = name == "fig1-snr375" ? "dose-response:delta=5" : "dose-response:delta=3";
        c.true_models = {0, 1, 2};
        s.T = 10;
        s.n_t = 15;
        s.rho = RhoSchedule::parse("inclusive");
        s.replications = 500;
    } else if (name == "robust-512") {
        s.suite = "robust-parameter";
        c.true_models = {0, 1, 4};
        s.n_t = 16;
        s.n_per_arm = {16, 16, 16, 16, 32, 32, 32};
        s.budget = 512;
        s.rho = RhoSchedule::parse("zero");
        s.replications = 500;
    } else if (name == "multivar-gof") {
        s.suite = "multivariate-linear";
        c.true_models = {0, 1, 2, 3, 4, 5};
        s.T = 15;
        s.n_t = 36;
        s.rho = RhoSchedule::parse("inclusive");
        s.eval = EvalMode::gof_filtered;
        s.replications = 500;
    } else {
        throw std::invalid_argument("unknown preset '" + name + "'");
    }
    s.true_index = c.true_models.front();
    return c;
}

}  // namespace seqdesign
