#include "lanp/runconfig.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace lanp {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

const std::vector<RunConfig::KeySpec>& RunConfig::schema() {
    using T = Type;
    static const std::vector<KeySpec> specs = {
        {"model.classes", T::kInt, "2", {}, "number of unit classes L"},
        {"model.d_lat", T::kInt, "8", {}, "latent dimension for u_C and z"},
        {"model.hidden", T::kInt, "128", {}, "width of the fully-connected layers"},
        {"model.self_attention", T::kEnum, "multi-head",
         {"uniform", "dot-product", "multi-head"}, "encoder self-attention kind"},
        {"model.attention_dim", T::kInt, "128", {}, "attention model dimension"},
        {"model.attention_heads", T::kInt, "4", {}, "self-attention heads"},
        {"model.cross_attention", T::kBool, "true",
         {}, "aggregate u_C with cross-attention (false -> mean)"},
        {"model.cross_heads", T::kInt, "4", {}, "cross-attention heads"},
        {"model.lambda", T::kDouble, "0.1", {}, "classifier regularizer weight"},
        {"model.pred_samples", T::kInt, "50", {}, "K latent samples per prediction"},
        {"model.label_aware", T::kBool, "true", {}, "false runs the ANP baseline"},
        {"model.sigma_d_floor", T::kDouble, "0.01", {}, "decoder noise-std floor"},
        {"model.sigma_e_floor", T::kDouble, "0.001", {}, "latent-std floor"},
        {"model.unlabeled_weights", T::kEnum, "targets", {"targets", "contexts"},
         "side providing the class weights of the unlabeled bound"},
        {"train.iterations", T::kInt64, "25000", {}, "optimizer steps"},
        {"train.batch_labeled", T::kInt, "8", {}, "labeled episodes per batch (pool source)"},
        {"train.batch_unlabeled", T::kInt, "8", {}, "unlabeled episodes per batch"},
        {"train.batch_synthetic", T::kInt, "0", {}, "synthetic episodes per batch"},
        {"train.gamma", T::kDouble, "1.0", {}, "labeled fraction for generated batches"},
        {"train.gamma_mode", T::kEnum, "exact", {"exact", "bernoulli"},
         "label dropping: exact count per batch or per-signal coin"},
        {"train.lr", T::kDouble, "0.0001", {}, "Adam learning rate"},
        {"train.beta1", T::kDouble, "0.9", {}, "Adam first-moment decay"},
        {"train.beta2", T::kDouble, "0.999", {}, "Adam second-moment decay"},
        {"train.eps", T::kDouble, "1e-08", {}, "Adam denominator epsilon"},
        {"train.seed", T::kUInt64, "1", {}, "root seed for init, data, and noise"},
        {"train.checkpoint_interval", T::kInt64, "0",
         {}, "write a checkpoint every N iterations (0 -> final only)"},
        {"train.log_interval", T::kInt64, "100", {}, "objective log cadence"},
        {"train.threads", T::kInt, "0", {}, "episode worker threads (0 -> auto)"},
        {"context.tau", T::kDouble, "10.0", {}, "domain end for context sampling"},
        {"context.m_min", T::kInt, "3", {}, "minimum context count"},
        {"context.m_max", T::kInt, "14", {}, "maximum context count"},
        {"context.max_attempts", T::kInt, "100", {}, "tau* redraw cap"},
        {"data.setting", T::kEnum, "sim1", {"sim1", "sim2"}, "synthetic generator family"},
        {"data.delta", T::kDouble, "2.0", {}, "sim2 coefficient spread"},
        {"data.train_points", T::kInt, "45", {}, "observations per training signal"},
        {"data.test_points", T::kInt, "20", {}, "observations per test signal"},
        {"data.noise_sd", T::kDouble, "0.03", {}, "observation noise standard deviation"},
        {"data.continuity_fix", T::kBool, "false",
         {}, "replace 1.8x^2 with 1.8x in the late sim1 group-II piece"},
        {"data.per_group", T::kInt, "8", {}, "generated signals per group per batch"},
        {"aug.grid_size", T::kInt, "100", {}, "FPCA grid resolution"},
        {"aug.rho", T::kDouble, "0.99", {}, "variance ratio selecting the component count"},
        {"aug.components", T::kInt, "0", {}, "GMM components (0 -> classes when labeled, else 2)"},
        {"aug.em_iterations", T::kInt, "200", {}, "EM iteration cap"},
        {"aug.em_tol", T::kDouble, "1e-08", {}, "EM log-likelihood stop tolerance"},
        {"aug.noise", T::kBool, "false", {}, "add observation noise to synthetic signals"},
        {"aug.noise_sd", T::kDouble, "0.03", {}, "synthetic noise level when enabled"},
        {"aug.points", T::kInt, "45", {}, "observations per synthetic signal (0 -> on grid)"},
        {"eval.grid_points", T::kInt, "400", {}, "RMSE evaluation grid resolution"},
        {"eval.alphas", T::kDoubleList, "0.3,0.5,0.7", {}, "degradation stages evaluated"},
        {"eval.gammas", T::kDoubleList, "0,0.25,0.5,0.75,1", {}, "label fractions evaluated"},
        {"eval.seeds", T::kInt, "3", {}, "seeds per experiment condition"},
        {"eval.latency_grid", T::kInt, "400", {}, "grid for online-update timing"},
    };
    return specs;
}

RunConfig::RunConfig() {
    for (const KeySpec& s : schema()) values_[s.key] = s.default_value;
}

const RunConfig::KeySpec& RunConfig::spec(const std::string& key) const {
    for (const KeySpec& s : schema())
        if (s.key == key) return s;
    throw ConfigError("unknown configuration key '" + key + "'");
}

void RunConfig::check_value(const KeySpec& s, const std::string& value) const {
    const char* want = "a value";
    switch (s.type) {
        case Type::kInt:
        case Type::kInt64: want = "an integer"; break;
        case Type::kUInt64: want = "an unsigned integer"; break;
        case Type::kDouble: want = "a number"; break;
        case Type::kBool: want = "true/false"; break;
        case Type::kDoubleList: want = "a comma-separated number list"; break;
        case Type::kEnum:
        case Type::kString: break;
    }
    auto fail = [&]() {
        throw ConfigError("key '" + s.key + "': expected " + std::string(want) + ", got '" +
                          value + "'");
    };
    try {
        std::size_t used = 0;
        switch (s.type) {
            case Type::kInt:
            case Type::kInt64: {
                (void)std::stoll(value, &used);
                if (used != value.size()) fail();
                break;
            }
            case Type::kUInt64: {
                (void)std::stoull(value, &used);
                if (used != value.size()) fail();
                break;
            }
            case Type::kDouble: {
                (void)std::stod(value, &used);
                if (used != value.size()) fail();
                break;
            }
            case Type::kBool: {
                if (value != "true" && value != "false" && value != "0" && value != "1")
                    fail();
                break;
            }
            case Type::kEnum: {
                if (std::find(s.choices.begin(), s.choices.end(), value) == s.choices.end()) {
                    std::string choices = "one of {";
                    for (std::size_t i = 0; i < s.choices.size(); ++i)
                        choices += (i ? ", " : "") + s.choices[i];
                    choices += "}";
                    throw ConfigError("key '" + s.key + "': expected " + choices + ", got '" +
                                      value + "'");
                }
                break;
            }
            case Type::kDoubleList: {
                (void)parse_double_list(value);
                break;
            }
            case Type::kString:
                break;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail();
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const KeySpec& s = spec(key);
    check_value(s, value);
    values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
    return it->second;
}

int RunConfig::get_int(const std::string& key) const { return (int)std::stoll(get(key)); }
std::int64_t RunConfig::get_int64(const std::string& key) const { return std::stoll(get(key)); }
std::uint64_t RunConfig::get_uint64(const std::string& key) const {
    return std::stoull(get(key));
}
double RunConfig::get_double(const std::string& key) const { return std::stod(get(key)); }
bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    return v == "true" || v == "1";
}
std::vector<double> RunConfig::get_double_list(const std::string& key) const {
    return parse_double_list(get(key));
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> errors;
    while (std::getline(ss, line)) {
        ++lineno;
        std::string stripped = line;
        std::size_t hash = stripped.find('#');
        if (hash != std::string::npos) stripped = stripped.substr(0, hash);
        stripped = trim(stripped);
        if (stripped.empty()) continue;
        std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            errors.push_back(origin + ":" + std::to_string(lineno) +
                             ": expected key=value, got '" + stripped + "'");
            continue;
        }
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        try {
            cfg.set(key, value);
        } catch (const ConfigError& e) {
            errors.push_back(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!errors.empty()) {
        std::string all;
        for (const std::string& e : errors) all += (all.empty() ? "" : "\n") + e;
        throw ConfigError(all);
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_text(text, path);
}

std::string RunConfig::render() const {
    std::string out;
    for (const auto& [key, value] : values_) out += key + "=" + value + "\n";
    return out;
}

ModelConfig RunConfig::model_config() const {
    ModelConfig m;
    m.classes = get_int("model.classes");
    m.d_lat = get_int("model.d_lat");
    m.hidden = get_int("model.hidden");
    const std::string kind = get("model.self_attention");
    m.self_attention.kind = kind == "uniform"       ? AttentionConfig::Kind::kUniform
                            : kind == "dot-product" ? AttentionConfig::Kind::kDotProduct
                                                    : AttentionConfig::Kind::kMultiHead;
    m.self_attention.model_dim = get_int("model.attention_dim");
    m.self_attention.heads = get_int("model.attention_heads");
    m.use_cross_attention = get_bool("model.cross_attention");
    m.cross_heads = get_int("model.cross_heads");
    m.lambda = get_double("model.lambda");
    m.pred_samples = get_int("model.pred_samples");
    m.label_aware = get_bool("model.label_aware");
    m.sigma_d_floor = get_double("model.sigma_d_floor");
    m.sigma_e_floor = get_double("model.sigma_e_floor");
    m.unlabeled_weights_from_targets = get("model.unlabeled_weights") == "targets";
    return m;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.iterations = get_int64("train.iterations");
    t.batch.labeled = get_int("train.batch_labeled");
    t.batch.unlabeled = get_int("train.batch_unlabeled");
    t.batch.synthetic = get_int("train.batch_synthetic");
    t.gamma = get_double("train.gamma");
    t.gamma_exact = get("train.gamma_mode") == "exact";
    t.adam.lr = get_double("train.lr");
    t.adam.beta1 = get_double("train.beta1");
    t.adam.beta2 = get_double("train.beta2");
    t.adam.eps = get_double("train.eps");
    t.seed = get_uint64("train.seed");
    t.checkpoint_interval = get_int64("train.checkpoint_interval");
    t.log_interval = get_int64("train.log_interval");
    t.threads = get_int("train.threads");
    return t;
}

ContextRule RunConfig::context_rule() const {
    ContextRule r;
    r.tau = get_double("context.tau");
    r.m_min = get_int("context.m_min");
    r.m_max = get_int("context.m_max");
    r.max_attempts = get_int("context.max_attempts");
    return r;
}

Sim1Options RunConfig::sim1_options() const {
    Sim1Options o;
    o.noise_sd = get_double("data.noise_sd");
    o.domain_end = get_double("context.tau");
    o.continuity_fix = get_bool("data.continuity_fix");
    return o;
}

Sim2Options RunConfig::sim2_options() const {
    Sim2Options o;
    o.delta = get_double("data.delta");
    o.noise_sd = get_double("data.noise_sd");
    o.domain_end = get_double("context.tau");
    return o;
}

} // namespace lanp
