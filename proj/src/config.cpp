#include "daclr/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "daclr/errors.hpp"

namespace daclr {

namespace {

std::string trim(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

struct IniValue {
    std::string text;
    bool consumed = false;
};

using IniSections = std::map<std::string, std::map<std::string, IniValue>>;

IniSections parse_ini(const std::string& text, const std::string& origin) {
    IniSections sections;
    std::istringstream in(text);
    std::string line;
    std::string section;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                raise(ErrorCode::ConfigError,
                      origin + ":" + std::to_string(line_no) + ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            raise(ErrorCode::ConfigError,
                  origin + ":" + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            raise(ErrorCode::ConfigError, origin + ":" + std::to_string(line_no) + ": empty key");
        sections[section][key] = {value, false};
    }
    return sections;
}

class IniReader {
public:
    IniReader(IniSections sections, std::string origin)
        : sections_(std::move(sections)), origin_(std::move(origin)) {}

    template <typename T, typename Parse>
    void get(const std::string& section, const std::string& key, T& out, Parse&& parse) {
        auto sec = sections_.find(section);
        if (sec == sections_.end()) return;
        auto it = sec->second.find(key);
        if (it == sec->second.end()) return;
        it->second.consumed = true;
        try {
            out = parse(it->second.text);
        } catch (const std::exception&) {
            raise(ErrorCode::ConfigError,
                  origin_ + ": bad value for [" + section + "] " + key + ": '" + it->second.text + "'");
        }
    }

    void get_double(const std::string& s, const std::string& k, double& out) {
        get(s, k, out, [](const std::string& v) { return std::stod(v); });
    }
    void get_u64(const std::string& s, const std::string& k, uint64_t& out) {
        get(s, k, out, [](const std::string& v) { return std::stoull(v); });
    }
    void get_size(const std::string& s, const std::string& k, size_t& out) {
        get(s, k, out, [](const std::string& v) { return static_cast<size_t>(std::stoull(v)); });
    }
    void get_u32(const std::string& s, const std::string& k, uint32_t& out) {
        get(s, k, out, [](const std::string& v) { return static_cast<uint32_t>(std::stoul(v)); });
    }
    void get_int(const std::string& s, const std::string& k, int& out) {
        get(s, k, out, [](const std::string& v) { return std::stoi(v); });
    }
    void get_string(const std::string& s, const std::string& k, std::string& out) {
        get(s, k, out, [](const std::string& v) { return v; });
    }
    void get_bool(const std::string& s, const std::string& k, bool& out) {
        get(s, k, out, [](const std::string& v) {
            if (v == "true" || v == "1" || v == "yes") return true;
            if (v == "false" || v == "0" || v == "no") return false;
            throw std::runtime_error("not a bool");
        });
    }
    void get_size_list(const std::string& s, const std::string& k, std::vector<size_t>& out) {
        get(s, k, out, [](const std::string& v) {
            std::vector<size_t> values;
            std::stringstream ss(v);
            std::string cell;
            while (std::getline(ss, cell, ',')) {
                std::string t = trim(cell);
                if (!t.empty()) values.push_back(static_cast<size_t>(std::stoull(t)));
            }
            if (values.empty()) throw std::runtime_error("empty list");
            return values;
        });
    }

    void reject_unconsumed() const {
        for (const auto& [section, entries] : sections_) {
            for (const auto& [key, value] : entries) {
                if (!value.consumed)
                    raise(ErrorCode::ConfigError,
                          origin_ + ": unknown config key [" + section + "] " + key);
            }
        }
    }

private:
    IniSections sections_;
    std::string origin_;
};

} // namespace

RunConfig parse_config(const std::string& ini_text, const std::string& origin) {
    RunConfig config;
    IniReader reader(parse_ini(ini_text, origin), origin);

    reader.get_u32("encoder", "hash_dim", config.encoder_hash_dim);
    reader.get_u32("encoder", "embed_dim", config.encoder_embed_dim);

    reader.get_double("bm25", "k1", config.bm25.k1);
    reader.get_double("bm25", "b", config.bm25.b);

    reader.get_size("preselect", "pages", config.preselect_pages);
    reader.get_size("preselect", "per_doc", config.preselect_per_doc);

    reader.get_int("train", "epochs", config.train.epochs);
    reader.get_int("train", "batch_size", config.train.batch_size);
    reader.get_double("train", "learning_rate", config.train.learning_rate);
    reader.get_double("train", "temperature", config.train.temperature);
    reader.get_size("train", "negatives", config.train.negatives_per_claim);
    reader.get_double("train", "tau_s", config.train.tau_s);
    reader.get_double("train", "delta_min", config.train.delta_min);
    reader.get_double("train", "delta_max", config.train.delta_max);
    reader.get_u64("train", "eval_interval", config.train.eval_interval);
    reader.get_u64("train", "hard_interval", config.train.hard_interval);
    reader.get_size("train", "mined_per_claim", config.train.mined_per_claim);
    reader.get_u64("train", "seed", config.train.rng_seed);
    reader.get_bool("train", "freeze_beta_semantic", config.train.freeze_beta_semantic);
    reader.get_bool("train", "random_negatives_only", config.train.random_negatives_only);

    reader.get_size("pipeline", "p", config.pipeline_p);
    reader.get_size("pipeline", "q", config.pipeline_q);

    reader.get_size_list("eval", "ks", config.eval_ks);

    reader.get_string("mllm", "base_url", config.mllm.base_url);
    reader.get_string("mllm", "model", config.mllm.model_name);
    reader.get_string("mllm", "api_key_env", config.mllm.api_key_source);
    reader.get_double("mllm", "timeout", config.mllm.timeout_seconds);
    reader.get_int("mllm", "max_retries", config.mllm.max_retries);
    reader.get_double("mllm", "retry_backoff", config.mllm.retry_backoff);
    reader.get_int("mllm", "max_concurrency", config.mllm.max_concurrency);

    reader.reject_unconsumed();
    config.validate();
    return config;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

void RunConfig::validate() const {
    if (encoder_embed_dim < 2) raise(ErrorCode::ConfigError, "encoder.embed_dim must be >= 2");
    if (encoder_hash_dim < encoder_embed_dim)
        raise(ErrorCode::ConfigError, "encoder.hash_dim must be >= embed_dim");
    if (bm25.k1 <= 0) raise(ErrorCode::ConfigError, "bm25.k1 must be > 0");
    if (bm25.b < 0 || bm25.b > 1) raise(ErrorCode::ConfigError, "bm25.b must be in [0, 1]");
    if (preselect_pages < 1) raise(ErrorCode::ConfigError, "preselect.pages must be >= 1");
    if (preselect_per_doc < 1) raise(ErrorCode::ConfigError, "preselect.per_doc must be >= 1");
    train.validate();
    if (pipeline_q >= pipeline_p)
        raise(ErrorCode::ConfigError, "pipeline.q must be < pipeline.p");
    for (size_t k : eval_ks) {
        if (k < 1) raise(ErrorCode::ConfigError, "eval.ks entries must be >= 1");
    }
    mllm.validate();
}

std::string RunConfig::to_ini() const {
    std::ostringstream out;
    out << "[encoder]\n"
        << "hash_dim = " << encoder_hash_dim << "\n"
        << "embed_dim = " << encoder_embed_dim << "\n\n"
        << "[bm25]\n"
        << "k1 = " << bm25.k1 << "\n"
        << "b = " << bm25.b << "\n\n"
        << "[preselect]\n"
        << "pages = " << preselect_pages << "\n"
        << "per_doc = " << preselect_per_doc << "\n\n"
        << "[train]\n"
        << "epochs = " << train.epochs << "\n"
        << "batch_size = " << train.batch_size << "\n"
        << "learning_rate = " << train.learning_rate << "\n"
        << "temperature = " << train.temperature << "\n"
        << "negatives = " << train.negatives_per_claim << "\n"
        << "tau_s = " << train.tau_s << "\n"
        << "delta_min = " << train.delta_min << "\n"
        << "delta_max = " << train.delta_max << "\n"
        << "eval_interval = " << train.eval_interval << "\n"
        << "hard_interval = " << train.hard_interval << "\n"
        << "mined_per_claim = " << train.mined_per_claim << "\n"
        << "seed = " << train.rng_seed << "\n"
        << "freeze_beta_semantic = " << (train.freeze_beta_semantic ? "true" : "false") << "\n"
        << "random_negatives_only = " << (train.random_negatives_only ? "true" : "false") << "\n\n"
        << "[pipeline]\n"
        << "p = " << pipeline_p << "\n"
        << "q = " << pipeline_q << "\n\n"
        << "[eval]\n"
        << "ks = ";
    for (size_t i = 0; i < eval_ks.size(); ++i) out << (i ? "," : "") << eval_ks[i];
    out << "\n\n"
        << "[mllm]\n"
        << "base_url = " << mllm.base_url << "\n"
        << "model = " << mllm.model_name << "\n"
        << "api_key_env = " << mllm.api_key_source << "\n"
        << "timeout = " << mllm.timeout_seconds << "\n"
        << "max_retries = " << mllm.max_retries << "\n"
        << "retry_backoff = " << mllm.retry_backoff << "\n"
        << "max_concurrency = " << mllm.max_concurrency << "\n";
    return out.str();
}

} // namespace daclr
