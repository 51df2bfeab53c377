#include "wganc/config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "wganc/error.hpp"
#include "wganc/rng.hpp"

namespace wganc::config {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::string& where,
                         std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) known = true;
        }
        if (!known) throw ConfigError("config: unknown key '" + where + item.key() + "'");
    }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: bad value for '") + key + "'");
    }
}

std::pair<double, double> get_range(const json& obj, const char* key, std::pair<double, double> fb) {
    if (!obj.contains(key)) return fb;
    const json& v = obj.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw ConfigError(std::string("config: '") + key + "' must be [lo, hi]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

void parse_train(const json& obj, trainer::TrainConfig& t) {
    reject_unknown_keys(obj, "train.",
                        {"batch_size", "n_critic", "beta", "penalty", "loss", "z_dim", "iterations",
                         "adam"});
    t.batch_size = get_or<size_t>(obj, "batch_size", t.batch_size);
    t.n_critic = get_or<size_t>(obj, "n_critic", t.n_critic);
    t.beta = get_or<double>(obj, "beta", t.beta);
    t.z_dim = get_or<size_t>(obj, "z_dim", t.z_dim);
    t.iterations = get_or<size_t>(obj, "iterations", t.iterations);
    const std::string penalty = get_or<std::string>(obj, "penalty", "one_sided");
    if (penalty == "one_sided") {
        t.penalty = trainer::PenaltyStyle::one_sided;
    } else if (penalty == "two_sided") {
        t.penalty = trainer::PenaltyStyle::two_sided;
    } else {
        throw ConfigError("config: penalty must be one_sided or two_sided");
    }
    const std::string loss = get_or<std::string>(obj, "loss", "wasserstein_gp");
    if (loss == "wasserstein_gp") {
        t.loss = trainer::LossMode::wasserstein_gp;
    } else if (loss == "vanilla_gan") {
        t.loss = trainer::LossMode::vanilla_gan;
    } else {
        throw ConfigError("config: loss must be wasserstein_gp or vanilla_gan");
    }
    if (obj.contains("adam")) {
        const json& a = obj.at("adam");
        reject_unknown_keys(a, "train.adam.", {"lr", "beta1", "beta2", "eps"});
        t.adam.lr = get_or<double>(a, "lr", t.adam.lr);
        t.adam.beta1 = get_or<double>(a, "beta1", t.adam.beta1);
        t.adam.beta2 = get_or<double>(a, "beta2", t.adam.beta2);
        t.adam.eps = get_or<double>(a, "eps", t.adam.eps);
    }
}

void parse_schedule(const json& obj, ScheduleSpec& s) {
    reject_unknown_keys(obj, "schedule.",
                        {"recipe", "iters_per_stage", "stage_len", "ramp_len", "stages"});
    if (obj.contains("stages")) {
        s.recipe = ScheduleRecipe::explicit_stages;
        for (const json& st : obj.at("stages")) {
            reject_unknown_keys(st, "schedule.stages[].", {"lambda", "iters"});
            curriculum::Stage stage;
            stage.lambda.w = st.at("lambda").get<std::vector<double>>();
            stage.iters = st.at("iters").get<size_t>();
            s.stages.push_back(std::move(stage));
        }
        return;
    }
    const std::string recipe = get_or<std::string>(obj, "recipe", "one_hot");
    if (recipe == "one_hot") {
        s.recipe = ScheduleRecipe::one_hot;
    } else if (recipe == "blended") {
        s.recipe = ScheduleRecipe::blended;
    } else {
        throw ConfigError("config: schedule recipe must be one_hot, blended, or explicit stages");
    }
    s.iters_per_stage = get_or<size_t>(obj, "iters_per_stage", s.iters_per_stage);
    s.stage_len = get_or<size_t>(obj, "stage_len", s.stage_len);
    s.ramp_len = get_or<size_t>(obj, "ramp_len", s.ramp_len);
}

void parse_family(const json& obj, families::FamilySpec& f) {
    reject_unknown_keys(obj, "family.",
                        {"kind", "lengths", "width", "height", "channels", "factors", "hidden"});
    const std::string kind = get_or<std::string>(obj, "kind", "seq_prefix");
    if (kind == "seq_prefix") {
        f.kind = families::FamilySpec::Kind::seq_prefix;
        f.lengths = get_or<std::vector<size_t>>(obj, "lengths", f.lengths);
    } else if (kind == "image_downsample") {
        f.kind = families::FamilySpec::Kind::image_downsample;
        f.image.width = get_or<size_t>(obj, "width", 0);
        f.image.height = get_or<size_t>(obj, "height", f.image.width);
        f.image.channels = get_or<size_t>(obj, "channels", 1);
        f.factors = get_or<std::vector<size_t>>(obj, "factors", f.factors);
    } else {
        throw ConfigError("config: family kind must be seq_prefix or image_downsample");
    }
    f.hidden = get_or<size_t>(obj, "hidden", f.hidden);
}

void parse_dataset(const json& obj, DatasetSpec& d) {
    reject_unknown_keys(obj, "dataset.", {"n", "length", "amplitude", "omega", "phase"});
    d.n = get_or<size_t>(obj, "n", d.n);
    d.length = get_or<size_t>(obj, "length", d.length);
    auto [a0, a1] = get_range(obj, "amplitude", {d.ranges.a_min, d.ranges.a_max});
    auto [w0, w1] = get_range(obj, "omega", {d.ranges.omega_min, d.ranges.omega_max});
    auto [b0, b1] = get_range(obj, "phase", {d.ranges.b_min, d.ranges.b_max});
    d.ranges.a_min = a0;
    d.ranges.a_max = a1;
    d.ranges.omega_min = w0;
    d.ranges.omega_max = w1;
    d.ranges.b_min = b0;
    d.ranges.b_max = b1;
}

}  // namespace

void RunConfig::validate() const {
    train.validate();
    family.validate();
    dataset.ranges.validate();
    if (dataset.n < 1 || dataset.length < 1) throw ConfigError("config: dataset must be non-empty");
    if (eval.grid < 2) throw ConfigError("config: eval grid must be >= 2");
    if (eval.num_samples < 1) throw ConfigError("config: eval num_samples must be >= 1");
    if (gen_hidden.empty()) throw ConfigError("config: generator needs at least one hidden layer");
    for (size_t h : gen_hidden) {
        if (h < 1) throw ConfigError("config: generator hidden units must be >= 1");
    }
    if (family.kind == families::FamilySpec::Kind::seq_prefix &&
        family.seq_len != dataset.length) {
        throw ConfigError("config: family sequence length must equal the dataset length");
    }
    build_schedule(*this);  // validates lambda algebra and dimension match
}

RunConfig parse(const std::string& json_text, const std::string& origin) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    reject_unknown_keys(root, "",
                        {"train", "schedule", "family", "dataset", "eval", "seeds", "generator",
                         "out_dir"});
    RunConfig cfg;
    if (root.contains("train")) parse_train(root.at("train"), cfg.train);
    if (root.contains("schedule")) parse_schedule(root.at("schedule"), cfg.schedule);
    if (root.contains("family")) parse_family(root.at("family"), cfg.family);
    if (root.contains("dataset")) parse_dataset(root.at("dataset"), cfg.dataset);
    if (root.contains("eval")) {
        const json& e = root.at("eval");
        reject_unknown_keys(e, "eval.", {"grid", "num_samples"});
        cfg.eval.grid = get_or<size_t>(e, "grid", cfg.eval.grid);
        cfg.eval.num_samples = get_or<size_t>(e, "num_samples", cfg.eval.num_samples);
    }
    if (root.contains("seeds")) {
        const json& s = root.at("seeds");
        reject_unknown_keys(s, "seeds.", {"data", "init", "train"});
        cfg.train.data_seed = get_or<uint64_t>(s, "data", cfg.train.data_seed);
        cfg.train.init_seed = get_or<uint64_t>(s, "init", cfg.train.init_seed);
        cfg.train.train_seed = get_or<uint64_t>(s, "train", cfg.train.train_seed);
    }
    if (root.contains("generator")) {
        const json& g = root.at("generator");
        reject_unknown_keys(g, "generator.", {"hidden"});
        if (g.contains("hidden")) {
            const json& h = g.at("hidden");
            if (h.is_array()) {
                cfg.gen_hidden = h.get<std::vector<size_t>>();
            } else if (h.is_number_unsigned()) {
                cfg.gen_hidden = {h.get<size_t>()};
            } else {
                throw ConfigError("config: generator.hidden must be a size or list of sizes");
            }
        }
    }
    cfg.out_dir = get_or<std::string>(root, "out_dir", "");

    cfg.family.seq_len = cfg.dataset.length;
    if (cfg.train.iterations == 0) cfg.train.iterations = build_schedule(cfg).total_iters();
    cfg.validate();
    return cfg;
}

RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

std::string to_json(const RunConfig& cfg) {
    json root;
    root["train"] = {
        {"batch_size", cfg.train.batch_size},
        {"n_critic", cfg.train.n_critic},
        {"beta", cfg.train.beta},
        {"penalty", cfg.train.penalty == trainer::PenaltyStyle::one_sided ? "one_sided" : "two_sided"},
        {"loss",
         cfg.train.loss == trainer::LossMode::wasserstein_gp ? "wasserstein_gp" : "vanilla_gan"},
        {"z_dim", cfg.train.z_dim},
        {"iterations", cfg.train.iterations},
        {"adam",
         {{"lr", cfg.train.adam.lr},
          {"beta1", cfg.train.adam.beta1},
          {"beta2", cfg.train.adam.beta2},
          {"eps", cfg.train.adam.eps}}},
    };
    switch (cfg.schedule.recipe) {
        case ScheduleRecipe::one_hot:
            root["schedule"] = {{"recipe", "one_hot"}, {"iters_per_stage", cfg.schedule.iters_per_stage}};
            break;
        case ScheduleRecipe::blended:
            root["schedule"] = {{"recipe", "blended"},
                                {"stage_len", cfg.schedule.stage_len},
                                {"ramp_len", cfg.schedule.ramp_len}};
            break;
        case ScheduleRecipe::explicit_stages: {
            json stages = json::array();
            for (const auto& st : cfg.schedule.stages) {
                stages.push_back({{"lambda", st.lambda.w}, {"iters", st.iters}});
            }
            root["schedule"] = {{"stages", std::move(stages)}};
            break;
        }
    }
    if (cfg.family.kind == families::FamilySpec::Kind::seq_prefix) {
        root["family"] = {{"kind", "seq_prefix"},
                          {"lengths", cfg.family.lengths},
                          {"hidden", cfg.family.hidden}};
    } else {
        root["family"] = {{"kind", "image_downsample"},   {"width", cfg.family.image.width},
                          {"height", cfg.family.image.height}, {"channels", cfg.family.image.channels},
                          {"factors", cfg.family.factors},     {"hidden", cfg.family.hidden}};
    }
    root["dataset"] = {{"n", cfg.dataset.n},
                       {"length", cfg.dataset.length},
                       {"amplitude", {cfg.dataset.ranges.a_min, cfg.dataset.ranges.a_max}},
                       {"omega", {cfg.dataset.ranges.omega_min, cfg.dataset.ranges.omega_max}},
                       {"phase", {cfg.dataset.ranges.b_min, cfg.dataset.ranges.b_max}}};
    root["eval"] = {{"grid", cfg.eval.grid}, {"num_samples", cfg.eval.num_samples}};
    root["seeds"] = {{"data", cfg.train.data_seed},
                     {"init", cfg.train.init_seed},
                     {"train", cfg.train.train_seed}};
    root["generator"] = {{"hidden", cfg.gen_hidden}};
    if (!cfg.out_dir.empty()) root["out_dir"] = cfg.out_dir;
    return root.dump(2) + "\n";
}

void apply_seed_override(RunConfig& cfg, uint64_t master_seed) {
    cfg.train.data_seed = mix_seed(master_seed, 10);
    cfg.train.init_seed = mix_seed(master_seed, 20);
    cfg.train.train_seed = mix_seed(master_seed, 30);
}

curriculum::Schedule build_schedule(const RunConfig& cfg) {
    const size_t d = cfg.family.kind == families::FamilySpec::Kind::seq_prefix
                         ? cfg.family.lengths.size()
                         : cfg.family.factors.size();
    switch (cfg.schedule.recipe) {
        case ScheduleRecipe::one_hot:
            return curriculum::one_hot_schedule(d, cfg.schedule.iters_per_stage);
        case ScheduleRecipe::blended:
            return curriculum::blended_schedule(d, cfg.schedule.stage_len, cfg.schedule.ramp_len);
        case ScheduleRecipe::explicit_stages: {
            curriculum::Schedule s{cfg.schedule.stages};
            for (const auto& st : s.stages()) {
                if (st.lambda.dim() != d) {
                    throw ConfigError("config: explicit stage dimension does not match the family");
                }
            }
            return s;
        }
    }
    throw ConfigError("config: unreachable schedule recipe");
}

curriculum::Schedule baseline_schedule(const RunConfig& cfg) {
    const size_t d = cfg.family.kind == families::FamilySpec::Kind::seq_prefix
                         ? cfg.family.lengths.size()
                         : cfg.family.factors.size();
    return curriculum::Schedule({{curriculum::Lambda::one_hot(d, d - 1), 1}});
}

nn::MlpSpec generator_spec(const RunConfig& cfg) {
    nn::MlpSpec spec;
    spec.input_dim = cfg.train.z_dim;
    spec.hidden_dims = cfg.gen_hidden;
    spec.output_dim = cfg.dataset.length;
    spec.hidden_activation = nn::Activation::tanh;
    return spec;
}

}  // namespace wganc::config
