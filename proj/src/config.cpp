#include "textgan/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "textgan/generator.hpp"

namespace textgan {

ModelDims RunConfig::model_dims(int vocab_size) const {
    ModelDims dims;
    dims.d_model = d_model;
    dims.n_layers = n_layers;
    dims.n_heads = n_heads;
    dims.d_head = d_head;
    dims.d_ff = d_ff;
    dims.max_len = max_len;
    dims.vocab_size = vocab_size;
    return dims;
}

double RunConfig::effective_lr_mle() const {
    if (lr_mle > 0.0) return lr_mle;
    return variant_from_name(variant) == VariantTag::Lstm ? 1e-2 : 1e-3;
}

void RunConfig::validate() const {
    variant_from_name(variant);  // throws ConfigError on unknown names
    if (source != "oracle" && source != "corpus") {
        throw ConfigError("data source must be 'oracle' or 'corpus', got '" + source + "'");
    }
    if (source == "corpus" && corpus_path.empty()) {
        throw ConfigError("corpus source requires corpus_path");
    }
    if (pretrain_iters < 0 || adv_iters < 0) throw ConfigError("iteration counts must be >= 0");
    if (batch_size < 1 || batches_per_iter < 1) throw ConfigError("batch settings must be >= 1");
    if (g_steps < 0 || d_steps < 0) throw ConfigError("step counts must be >= 0");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (eval_samples < 2) throw ConfigError("eval_samples must be >= 2");
    if (max_len < 2) throw ConfigError("max_len must be >= 2");
    if (lambda_word < 0.0 || lambda_sentence < 0.0 ||
        std::abs(lambda_word + lambda_sentence - 1.0) > 1e-9) {
        throw ConfigError("lambda_word + lambda_sentence must equal 1");
    }
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

namespace {

struct FieldBinder {
    std::map<std::string, std::function<void(RunConfig&, const std::string&)>> setters;
    std::map<std::string, std::function<std::string(const RunConfig&)>> getters;
    std::vector<std::pair<std::string, std::string>> layout;  // section -> key order

    template <typename T>
    void bind(const std::string& section, const std::string& key, T RunConfig::* member) {
        const std::string full = section + "." + key;
        layout.emplace_back(section, key);
        setters[full] = [member, full](RunConfig& cfg, const std::string& value) {
            std::istringstream is(value);
            if constexpr (std::is_same_v<T, std::string>) {
                cfg.*member = value;
            } else if constexpr (std::is_same_v<T, bool>) {
                if (value == "true" || value == "1") {
                    cfg.*member = true;
                } else if (value == "false" || value == "0") {
                    cfg.*member = false;
                } else {
                    throw ConfigError("bad boolean for " + full + ": '" + value + "'");
                }
            } else {
                T parsed{};
                is >> parsed;
                if (is.fail() || !(is >> std::ws).eof()) {
                    throw ConfigError("bad value for " + full + ": '" + value + "'");
                }
                cfg.*member = parsed;
            }
        };
        getters[full] = [member](const RunConfig& cfg) {
            if constexpr (std::is_same_v<T, std::string>) {
                return cfg.*member;
            } else if constexpr (std::is_same_v<T, bool>) {
                return std::string(cfg.*member ? "true" : "false");
            } else {
                std::ostringstream os;
                os.precision(17);
                os << cfg.*member;
                return os.str();
            }
        };
    }
};

const FieldBinder& binder() {
    static const FieldBinder b = [] {
        FieldBinder f;
        f.bind("run", "variant", &RunConfig::variant);
        f.bind("run", "seed", &RunConfig::seed);
        f.bind("run", "out_dir", &RunConfig::out_dir);

        f.bind("dims", "d_model", &RunConfig::d_model);
        f.bind("dims", "n_layers", &RunConfig::n_layers);
        f.bind("dims", "n_heads", &RunConfig::n_heads);
        f.bind("dims", "d_head", &RunConfig::d_head);
        f.bind("dims", "d_ff", &RunConfig::d_ff);
        f.bind("dims", "max_len", &RunConfig::max_len);

        f.bind("data", "source", &RunConfig::source);
        f.bind("data", "oracle_seed", &RunConfig::oracle_seed);
        f.bind("data", "oracle_vocab", &RunConfig::oracle_vocab);
        f.bind("data", "oracle_seq_len", &RunConfig::oracle_seq_len);
        f.bind("data", "train_size", &RunConfig::train_size);
        f.bind("data", "heldout_size", &RunConfig::heldout_size);
        f.bind("data", "corpus_path", &RunConfig::corpus_path);
        f.bind("data", "max_vocab", &RunConfig::max_vocab);
        f.bind("data", "heldout_fraction", &RunConfig::heldout_fraction);
        f.bind("data", "embedding_path", &RunConfig::embedding_path);

        f.bind("train", "pretrain_iters", &RunConfig::pretrain_iters);
        f.bind("train", "adv_iters", &RunConfig::adv_iters);
        f.bind("train", "g_steps", &RunConfig::g_steps);
        f.bind("train", "d_steps", &RunConfig::d_steps);
        f.bind("train", "batch_size", &RunConfig::batch_size);
        f.bind("train", "batches_per_iter", &RunConfig::batches_per_iter);
        f.bind("train", "lr_mle", &RunConfig::lr_mle);
        f.bind("train", "lr_adv_g", &RunConfig::lr_adv_g);
        f.bind("train", "lr_d", &RunConfig::lr_d);
        f.bind("train", "lambda_word", &RunConfig::lambda_word);
        f.bind("train", "lambda_sentence", &RunConfig::lambda_sentence);
        f.bind("train", "reward_clip", &RunConfig::reward_clip);
        f.bind("train", "reward_floor", &RunConfig::reward_floor);
        f.bind("train", "reward_normalize", &RunConfig::reward_normalize);
        f.bind("train", "nan_guard", &RunConfig::nan_guard);
        f.bind("train", "lr_warmup", &RunConfig::lr_warmup);
        f.bind("train", "warmup_iters", &RunConfig::warmup_iters);
        f.bind("train", "dropout", &RunConfig::dropout);

        f.bind("eval", "eval_every", &RunConfig::eval_every);
        f.bind("eval", "eval_samples", &RunConfig::eval_samples);
        f.bind("eval", "bleu_refs_cap", &RunConfig::bleu_refs_cap);
        f.bind("eval", "checkpoint_every", &RunConfig::checkpoint_every);
        f.bind("eval", "sample_table_size", &RunConfig::sample_table_size);
        return f;
    }();
    return b;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string full = section + "." + key;
        auto it = binder().setters.find(full);
        if (it == binder().setters.end()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" +
                              full + "'");
        }
        it->second(cfg, value);
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_config(in);
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    std::string section;
    for (const auto& [sec, key] : binder().layout) {
        if (sec != section) {
            if (!section.empty()) out << "\n";
            out << "[" << sec << "]\n";
            section = sec;
        }
        out << key << " = " << binder().getters.at(sec + "." + key)(cfg) << "\n";
    }
    return out.str();
}

}  // namespace textgan
