#include "cystonet/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace cysto {

namespace {

struct KeyEntry {
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int parse_int(const std::string& v) {
    std::size_t used = 0;
    const int r = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
}

double parse_double(const std::string& v) {
    std::size_t used = 0;
    const double r = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
}

bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw std::invalid_argument(v);
}

const std::vector<KeyEntry>& registry() {
    auto num = [](auto getter, auto setter) {
        return std::pair{getter, setter};
    };
    (void)num;
    static const std::vector<KeyEntry> table = [] {
        std::vector<KeyEntry> t;
        auto add_int = [&t](const char* key, auto ref) {
            t.push_back({key, [ref](const RunConfig& c) { return std::to_string(*ref(const_cast<RunConfig&>(c))); },
                         [ref](RunConfig& c, const std::string& v) { *ref(c) = parse_int(v); }});
        };
        auto add_double = [&t](const char* key, auto ref) {
            t.push_back({key, [ref](const RunConfig& c) { return fmt_double(*ref(const_cast<RunConfig&>(c))); },
                         [ref](RunConfig& c, const std::string& v) { *ref(c) = parse_double(v); }});
        };
        auto add_bool = [&t](const char* key, auto ref) {
            t.push_back({key, [ref](const RunConfig& c) { return *ref(const_cast<RunConfig&>(c)) ? "1" : "0"; },
                         [ref](RunConfig& c, const std::string& v) { *ref(c) = parse_bool(v); }});
        };
        auto add_u64 = [&t](const char* key, auto ref) {
            t.push_back({key, [ref](const RunConfig& c) { return std::to_string(*ref(const_cast<RunConfig&>(c))); },
                         [ref](RunConfig& c, const std::string& v) { *ref(c) = std::stoull(v); }});
        };

        add_int("model.input_h", [](RunConfig& c) { return &c.model.input_h; });
        add_int("model.input_w", [](RunConfig& c) { return &c.model.input_w; });
        add_int("model.in_channels", [](RunConfig& c) { return &c.model.in_channels; });
        add_int("model.num_classes", [](RunConfig& c) { return &c.model.num_classes; });
        t.push_back({"model.stage_channels",
                     [](const RunConfig& c) {
                         std::string out;
                         for (std::size_t i = 0; i < c.model.stage_channels.size(); ++i)
                             out += (i ? "," : "") + std::to_string(c.model.stage_channels[i]);
                         return out;
                     },
                     [](RunConfig& c, const std::string& v) {
                         std::vector<int> ch;
                         std::istringstream in(v);
                         std::string item;
                         while (std::getline(in, item, ',')) ch.push_back(parse_int(item));
                         if (ch.empty()) throw std::invalid_argument(v);
                         c.model.stage_channels = std::move(ch);
                     }});
        add_int("model.transformer.embed_dim", [](RunConfig& c) { return &c.model.transformer.embed_dim; });
        add_int("model.transformer.num_heads", [](RunConfig& c) { return &c.model.transformer.num_heads; });
        add_int("model.transformer.head_dim", [](RunConfig& c) { return &c.model.transformer.head_dim; });
        add_double("model.transformer.mlp_ratio", [](RunConfig& c) { return &c.model.transformer.mlp_ratio; });
        t.push_back({"model.gate_variant",
                     [](const RunConfig& c) { return std::string(variant_name(c.model.gate_variant)); },
                     [](RunConfig& c, const std::string& v) { c.model.gate_variant = parse_variant(v); }});
        t.push_back({"model.gate_mode",
                     [](const RunConfig& c) { return std::string(gate_mode_name(c.model.gate_mode)); },
                     [](RunConfig& c, const std::string& v) { c.model.gate_mode = parse_gate_mode(v); }});
        add_int("model.gate_token_budget", [](RunConfig& c) { return &c.model.gate_token_budget; });
        add_bool("model.use_dag", [](RunConfig& c) { return &c.model.ablation.use_dag; });
        add_bool("model.use_transformer", [](RunConfig& c) { return &c.model.ablation.use_transformer; });
        add_u64("model.seed", [](RunConfig& c) { return &c.model.seed; });

        add_int("train.batch_size", [](RunConfig& c) { return &c.train.batch_size; });
        add_int("train.max_epochs", [](RunConfig& c) { return &c.train.max_epochs; });
        add_u64("train.seed", [](RunConfig& c) { return &c.train.seed; });
        add_double("train.w_dice", [](RunConfig& c) { return &c.train.loss_weights.w_dice; });
        add_double("train.w_scce", [](RunConfig& c) { return &c.train.loss_weights.w_scce; });
        add_double("train.lr", [](RunConfig& c) { return &c.train.adam.lr; });
        add_double("train.beta1", [](RunConfig& c) { return &c.train.adam.beta1; });
        add_double("train.beta2", [](RunConfig& c) { return &c.train.adam.beta2; });
        add_double("train.epsilon", [](RunConfig& c) { return &c.train.adam.epsilon; });
        add_double("train.sched.factor", [](RunConfig& c) { return &c.train.scheduler.factor; });
        add_int("train.sched.patience", [](RunConfig& c) { return &c.train.scheduler.patience; });
        add_double("train.sched.min_delta", [](RunConfig& c) { return &c.train.scheduler.min_delta; });
        add_double("train.sched.min_lr", [](RunConfig& c) { return &c.train.scheduler.min_lr; });
        add_bool("train.augment", [](RunConfig& c) { return &c.train.augment; });
        add_double("train.aug.contrast_lo", [](RunConfig& c) { return &c.train.augmentation.contrast_lo; });
        add_double("train.aug.contrast_hi", [](RunConfig& c) { return &c.train.augmentation.contrast_hi; });
        add_double("train.aug.rotation_degrees",
                   [](RunConfig& c) { return &c.train.augmentation.rotation_degrees; });
        add_double("train.aug.scale_lo", [](RunConfig& c) { return &c.train.augmentation.scale_lo; });
        add_double("train.aug.scale_hi", [](RunConfig& c) { return &c.train.augmentation.scale_hi; });
        add_u64("train.aug.seed", [](RunConfig& c) { return &c.train.augmentation.seed; });
        add_double("train.stop_at_train_iou", [](RunConfig& c) { return &c.train.stop_at_train_iou; });

        add_int("data.synth_n", [](RunConfig& c) { return &c.synth_n; });
        add_u64("data.seed", [](RunConfig& c) { return &c.data_seed; });
        add_double("data.split.train", [](RunConfig& c) { return &c.split_train; });
        add_double("data.split.val", [](RunConfig& c) { return &c.split_val; });
        add_double("data.split.test", [](RunConfig& c) { return &c.split_test; });
        add_int("sweep.epochs", [](RunConfig& c) { return &c.sweep_epochs; });
        return t;
    }();
    return table;
}

const KeyEntry& find_key(const std::string& key) {
    for (const auto& e : registry())
        if (key == e.key) return e;
    raise(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& e : registry()) keys.emplace_back(e.key);
    return keys;
}

void config_set(RunConfig& cfg, const std::string& key, const std::string& value) {
    const KeyEntry& entry = find_key(key);
    try {
        entry.set(cfg, value);
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        raise(ErrorKind::InvalidArgument, "bad value for '" + key + "': '" + value + "'");
    }
}

std::string config_get(const RunConfig& cfg, const std::string& key) { return find_key(key).get(cfg); }

std::string config_to_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& e : registry()) out += std::string(e.key) + " = " + e.get(cfg) + "\n";
    return out;
}

void config_save(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    out << config_to_text(cfg);
    if (!out) raise(ErrorKind::Io, "cannot write config: " + path);
}

RunConfig config_parse(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            raise(ErrorKind::InvalidArgument, "config line " + std::to_string(lineno) + " has no '='");
        config_set(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

RunConfig config_load(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::Io, "cannot open config: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return config_parse(buf.str());
}

}  // namespace cysto
