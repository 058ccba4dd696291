#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sepdiff/errors.hpp"
#include "sepdiff/prior.hpp"
#include "sepdiff/schedule.hpp"
#include "sepdiff/signals.hpp"
#include "sepdiff/solvers.hpp"
#include "sepdiff/vecio.hpp"
#include "sepdiff/wav.hpp"

namespace sepdiff {

// Plain-text experiment configuration: TOML-compatible [section] headers and
// key = value pairs (numbers, strings, booleans, flat arrays). Keys are
// addressed as "section.key".

struct ConfigValue {
    enum class Kind { number, string, boolean, number_list, string_list };
    Kind kind = Kind::number;
    double num = 0.0;
    std::string str;
    bool boolean = false;
    std::vector<double> nums;
    std::vector<std::string> strs;
};

class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open config " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path);
    }

    static ConfigFile parse(const std::string& text, const std::string& origin = "<string>") {
        ConfigFile cfg;
        cfg.raw_ = text;
        std::string section;
        std::istringstream lines(text);
        std::string line;
        int lineno = 0;
        while (std::getline(lines, line)) {
            ++lineno;
            const std::string stripped = strip_comment(line);
            const std::string trimmed = trim(stripped);
            if (trimmed.empty()) continue;
            if (trimmed.front() == '[') {
                if (trimmed.back() != ']') {
                    throw ConfigError(origin + ":" + std::to_string(lineno) +
                                      ": malformed section header");
                }
                section = trim(trimmed.substr(1, trimmed.size() - 2));
                continue;
            }
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": expected key = value");
            }
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string val = trim(trimmed.substr(eq + 1));
            if (key.empty() || val.empty()) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key or value");
            }
            const std::string full = section.empty() ? key : section + "." + key;
            cfg.values_[full] = parse_value(val, origin, lineno);
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    double number(const std::string& key) const {
        const auto& v = require(key);
        if (v.kind != ConfigValue::Kind::number) throw ConfigError(key + " must be a number");
        return v.num;
    }

    double number_or(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }

    long long integer(const std::string& key) const {
        const double d = number(key);
        const long long i = static_cast<long long>(d);
        if (static_cast<double>(i) != d) throw ConfigError(key + " must be an integer");
        return i;
    }

    long long integer_or(const std::string& key, long long fallback) const {
        return has(key) ? integer(key) : fallback;
    }

    std::string string(const std::string& key) const {
        const auto& v = require(key);
        if (v.kind != ConfigValue::Kind::string) throw ConfigError(key + " must be a string");
        return v.str;
    }

    std::string string_or(const std::string& key, const std::string& fallback) const {
        return has(key) ? string(key) : fallback;
    }

    bool boolean(const std::string& key) const {
        const auto& v = require(key);
        if (v.kind != ConfigValue::Kind::boolean) throw ConfigError(key + " must be a boolean");
        return v.boolean;
    }

    bool boolean_or(const std::string& key, bool fallback) const {
        return has(key) ? boolean(key) : fallback;
    }

    std::vector<double> numbers(const std::string& key) const {
        const auto& v = require(key);
        if (v.kind == ConfigValue::Kind::number) return {v.num};
        if (v.kind != ConfigValue::Kind::number_list) {
            throw ConfigError(key + " must be a number array");
        }
        return v.nums;
    }

    std::vector<std::string> strings(const std::string& key) const {
        const auto& v = require(key);
        if (v.kind == ConfigValue::Kind::string) return {v.str};
        if (v.kind != ConfigValue::Kind::string_list) {
            throw ConfigError(key + " must be a string array");
        }
        return v.strs;
    }

    const std::string& raw_text() const { return raw_; }

    // FNV-1a over the raw file bytes; identical files hash identically.
    std::string hash_hex() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : raw_) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        return std::string(buf);
    }

private:
    std::map<std::string, ConfigValue> values_;
    std::string raw_;

    const ConfigValue& require(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config key " + key);
        return it->second;
    }

    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    static std::string strip_comment(const std::string& s) {
        bool in_str = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') in_str = !in_str;
            if (s[i] == '#' && !in_str) return s.substr(0, i);
        }
        return s;
    }

    static ConfigValue parse_scalar(const std::string& tok, const std::string& origin,
                                    int lineno) {
        ConfigValue v;
        if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
            v.kind = ConfigValue::Kind::string;
            v.str = tok.substr(1, tok.size() - 2);
            return v;
        }
        if (tok == "true" || tok == "false") {
            v.kind = ConfigValue::Kind::boolean;
            v.boolean = tok == "true";
            return v;
        }
        try {
            std::size_t used = 0;
            v.num = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            v.kind = ConfigValue::Kind::number;
            return v;
        } catch (const std::exception&) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": cannot parse value '" +
                              tok + "'");
        }
    }

    static ConfigValue parse_value(const std::string& val, const std::string& origin,
                                   int lineno) {
        if (val.front() != '[') return parse_scalar(val, origin, lineno);
        if (val.back() != ']') {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated array");
        }
        ConfigValue out;
        const std::string inner = val.substr(1, val.size() - 2);
        std::vector<std::string> toks;
        std::string cur;
        bool in_str = false;
        for (char c : inner) {
            if (c == '"') in_str = !in_str;
            if (c == ',' && !in_str) {
                toks.push_back(trim(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!trim(cur).empty()) toks.push_back(trim(cur));
        if (toks.empty()) {
            out.kind = ConfigValue::Kind::number_list;
            return out;
        }
        const ConfigValue first = parse_scalar(toks.front(), origin, lineno);
        if (first.kind == ConfigValue::Kind::string) {
            out.kind = ConfigValue::Kind::string_list;
            for (const auto& t : toks) out.strs.push_back(parse_scalar(t, origin, lineno).str);
        } else {
            out.kind = ConfigValue::Kind::number_list;
            for (const auto& t : toks) out.nums.push_back(parse_scalar(t, origin, lineno).num);
        }
        return out;
    }
};

// Prior declaration: inline scalars broadcast over the signal length, or
// vectors referenced from SDPR files.
struct PriorSpec {
    std::string type = "gaussian";  // gaussian | gmm | block_gmm
    double mean = 0.0;
    double var = 1.0;
    std::string mean_file;  // optional vector-valued mean
    std::string var_file;
    // gmm only: per-component scalars
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> vars;
    // block_gmm only: one prototype vector file per component
    std::vector<std::string> mean_files;
    std::size_t block_len = 64;
};

struct RunConfig {
    // schedule
    int T = 200;
    double beta_min = 1e-4;
    double beta_max = 2e-2;

    SeparationConfig sep;

    // embedder
    std::string emb_type = "band_energy";
    std::size_t emb_frame = 256;
    std::size_t emb_hop = 128;
    std::size_t emb_bands = 16;
    int emb_sharpness = 1;

    MixtureSpec mix;
    std::vector<SourceParams> sources;
    std::vector<PriorSpec> priors;  // one per track

    // run
    std::size_t n_mixtures = 10;
    WavFormat out_format = WavFormat::pcm16;
    std::vector<std::string> variants = {"unprocessed", "dirac", "hybrid", "hybrid_guided"};
    std::size_t swap_frame = 512;

    std::string config_hash;
};

namespace detail {

inline SolverKind parse_solver(const std::string& s) {
    if (s == "dps") return SolverKind::dps;
    if (s == "dsg") return SolverKind::dsg;
    if (s == "dirac") return SolverKind::dirac;
    if (s == "hybrid") return SolverKind::hybrid;
    throw ConfigError("unknown solver '" + s + "' (want dps|dsg|dirac|hybrid)");
}

inline PriorSpec parse_prior(const ConfigFile& cfg, const std::string& section) {
    PriorSpec p;
    p.type = cfg.string_or(section + ".type", "gaussian");
    if (p.type == "gaussian") {
        p.mean = cfg.number_or(section + ".mean", 0.0);
        p.var = cfg.number_or(section + ".var", 1.0);
        p.mean_file = cfg.string_or(section + ".mean_file", "");
        p.var_file = cfg.string_or(section + ".var_file", "");
    } else if (p.type == "gmm") {
        p.weights = cfg.numbers(section + ".weights");
        p.means = cfg.numbers(section + ".means");
        p.vars = cfg.numbers(section + ".vars");
        if (p.weights.size() != p.means.size() || p.weights.size() != p.vars.size()) {
            throw ConfigError(section + ": weights/means/vars must have equal lengths");
        }
    } else if (p.type == "block_gmm") {
        p.mean_files = cfg.strings(section + ".mean_files");
        p.weights = cfg.has(section + ".weights")
                        ? cfg.numbers(section + ".weights")
                        : std::vector<double>(p.mean_files.size(),
                                              1.0 / static_cast<double>(p.mean_files.size()));
        p.var = cfg.number_or(section + ".var", 0.1);
        p.block_len = static_cast<std::size_t>(cfg.integer_or(section + ".block_len", 64));
        if (p.weights.size() != p.mean_files.size()) {
            throw ConfigError(section + ": weights/mean_files must have equal lengths");
        }
    } else {
        throw ConfigError(section + ".type must be gaussian, gmm or block_gmm");
    }
    return p;
}

}  // namespace detail

inline RunConfig load_run_config(const ConfigFile& cfg) {
    RunConfig rc;
    rc.config_hash = cfg.hash_hex();

    rc.T = static_cast<int>(cfg.integer_or("schedule.T", 200));
    rc.beta_min = cfg.number_or("schedule.beta_min", 1e-4);
    rc.beta_max = cfg.number_or("schedule.beta_max", 2e-2);
    rc.sep.churn = cfg.number_or("schedule.churn", 0.0);

    rc.sep.K = static_cast<int>(cfg.integer_or("solver.K", 2));
    rc.sep.solver = detail::parse_solver(cfg.string_or("solver.type", "hybrid"));
    rc.sep.T_dirac = static_cast<int>(cfg.integer_or("solver.T_dirac", rc.T));
    rc.sep.T_D = static_cast<int>(cfg.integer_or("solver.T_D", 1));
    rc.sep.T_spk_start = static_cast<int>(cfg.integer_or("solver.T_spk_start", 75));
    rc.sep.T_spk_end = static_cast<int>(cfg.integer_or("solver.T_spk_end", 175));
    rc.sep.gamma = cfg.number_or("solver.gamma", 0.1);
    const std::string gm = cfg.string_or("solver.gamma_mode", "dps_const");
    if (gm == "dps_const") {
        rc.sep.gamma_mode = GammaMode::dps_const;
    } else if (gm == "dsg") {
        rc.sep.gamma_mode = GammaMode::dsg;
    } else {
        throw ConfigError("solver.gamma_mode must be dps_const or dsg");
    }
    const std::string xm = cfg.string_or("solver.xi_mode", "inv_sigma2_k");
    if (xm == "inv_sigma2_k") {
        rc.sep.xi_mode = XiMode::inv_sigma2_k;
    } else if (xm == "constant") {
        rc.sep.xi_mode = XiMode::constant;
    } else {
        throw ConfigError("solver.xi_mode must be inv_sigma2_k or constant");
    }
    rc.sep.xi_scale = cfg.number_or("solver.xi_scale", 1.0);
    const std::string dm = cfg.string_or("solver.dirac_mode", "anchor");
    if (dm == "anchor") {
        rc.sep.dirac_mode = DiracMode::anchor;
    } else if (dm == "soft") {
        rc.sep.dirac_mode = DiracMode::soft;
    } else {
        throw ConfigError("solver.dirac_mode must be anchor or soft");
    }
    const std::string ds = cfg.string_or("solver.dirac_sign", "corrective");
    if (ds == "corrective") {
        rc.sep.dirac_sign = DiracSign::corrective;
    } else if (ds == "inverted") {
        rc.sep.dirac_sign = DiracSign::inverted;
    } else {
        throw ConfigError("solver.dirac_sign must be corrective or inverted");
    }
    const std::string gmode = cfg.string_or("solver.guidance_mode", "score");
    if (gmode == "score") {
        rc.sep.guidance_mode = GuidanceMode::score;
    } else if (gmode == "direct") {
        rc.sep.guidance_mode = GuidanceMode::direct;
    } else {
        throw ConfigError("solver.guidance_mode must be score or direct");
    }
    const std::string ginput = cfg.string_or("solver.guidance_input", "denoised");
    if (ginput == "denoised") {
        rc.sep.guidance_input = GuidanceInput::denoised;
    } else if (ginput == "state") {
        rc.sep.guidance_input = GuidanceInput::state;
    } else {
        throw ConfigError("solver.guidance_input must be denoised or state");
    }
    rc.sep.seed = static_cast<std::uint64_t>(cfg.integer_or("solver.seed", 0));
    rc.sep.guidance_enabled = cfg.boolean_or("solver.guidance_enabled", false);
    rc.sep.guidance_scale = cfg.number_or("solver.guidance_scale", 1.0);
    rc.sep.anchor = static_cast<int>(cfg.integer_or("solver.anchor", 0));

    rc.emb_type = cfg.string_or("embedder.type", "band_energy");
    if (rc.emb_type != "band_energy" && rc.emb_type != "spectral_contrast") {
        throw ConfigError("embedder.type must be band_energy or spectral_contrast");
    }
    rc.emb_frame = static_cast<std::size_t>(cfg.integer_or("embedder.frame_len", 256));
    rc.emb_hop = static_cast<std::size_t>(cfg.integer_or("embedder.hop", 128));
    rc.emb_bands = static_cast<std::size_t>(cfg.integer_or("embedder.bands", 16));
    rc.emb_sharpness = static_cast<int>(cfg.integer_or("embedder.sharpness", 1));

    rc.mix.K = rc.sep.K;
    rc.mix.duration_s = cfg.number_or("mixture.duration", 0.5);
    rc.mix.sample_rate = static_cast<int>(cfg.integer_or("mixture.sample_rate", 8000));
    rc.mix.rms_db_low = cfg.number_or("mixture.rms_db_low", -25.0);
    rc.mix.rms_db_high = cfg.number_or("mixture.rms_db_high", -20.0);
    rc.mix.offset_max = static_cast<std::size_t>(cfg.integer_or("mixture.offset_max", 0));
    rc.mix.seed = static_cast<std::uint64_t>(cfg.integer_or("mixture.seed", 1));

    std::vector<double> f0s = cfg.has("mixture.f0") ? cfg.numbers("mixture.f0")
                                                    : std::vector<double>{200.0, 310.0};
    const int harm = static_cast<int>(cfg.integer_or("mixture.n_harmonics", 4));
    const bool alternating = cfg.boolean_or("mixture.alternating", false);
    const double segment = cfg.number_or("mixture.segment_s", 0.1);
    std::vector<double> source_seeds;
    if (cfg.has("mixture.source_seeds")) source_seeds = cfg.numbers("mixture.source_seeds");
    rc.sources.clear();
    for (int k = 0; k < rc.sep.K; ++k) {
        SourceParams sp;
        sp.f0 = f0s[static_cast<std::size_t>(k) % f0s.size()];
        sp.n_harmonics = harm;
        sp.alternating = alternating;
        sp.segment_s = segment;
        if (!source_seeds.empty()) {
            sp.seed = static_cast<std::uint64_t>(
                source_seeds[static_cast<std::size_t>(k) % source_seeds.size()]);
        }
        rc.sources.push_back(sp);
    }

    rc.priors.clear();
    for (int k = 0; k < rc.sep.K; ++k) {
        const std::string per_track = "prior." + std::to_string(k + 1);
        if (cfg.has(per_track + ".type") || cfg.has(per_track + ".mean") ||
            cfg.has(per_track + ".var")) {
            rc.priors.push_back(detail::parse_prior(cfg, per_track));
        } else {
            rc.priors.push_back(detail::parse_prior(cfg, "prior"));
        }
    }

    rc.n_mixtures = static_cast<std::size_t>(cfg.integer_or("run.mixtures", 10));
    if (rc.n_mixtures < 1) throw ConfigError("run.mixtures must be >= 1");
    const std::string fmt = cfg.string_or("run.out_format", "pcm16");
    if (fmt == "pcm16") {
        rc.out_format = WavFormat::pcm16;
    } else if (fmt == "float32") {
        rc.out_format = WavFormat::float32;
    } else {
        throw ConfigError("run.out_format must be pcm16 or float32");
    }
    if (cfg.has("run.variants")) rc.variants = cfg.strings("run.variants");
    rc.swap_frame = static_cast<std::size_t>(cfg.integer_or("run.swap_frame", 512));
    return rc;
}

inline RunConfig load_run_config(const std::string& path) {
    return load_run_config(ConfigFile::parse_file(path));
}

// Instantiates the declared prior for one track at signal length D.
inline std::unique_ptr<ScoreModel> make_score_model(const PriorSpec& spec, std::size_t D,
                                                    std::shared_ptr<const NoiseSchedule> sched) {
    auto broadcast = [D](double scalar, const std::string& file) {
        if (file.empty()) return std::vector<double>(D, scalar);
        auto v = read_vector_file(file);
        if (v.size() != D) {
            throw ConfigError(file + " holds " + std::to_string(v.size()) +
                              " values but the signal length is " + std::to_string(D));
        }
        return v;
    };
    if (spec.type == "gaussian") {
        GaussianPrior prior(broadcast(spec.mean, spec.mean_file),
                            broadcast(spec.var, spec.var_file));
        return std::make_unique<GaussianScoreModel>(std::move(prior), std::move(sched));
    }
    if (spec.type == "block_gmm") {
        std::vector<std::vector<double>> protos;
        for (const auto& f : spec.mean_files) {
            protos.push_back(read_vector_file(f));
            if (protos.back().size() != D) {
                throw ConfigError(f + " holds " + std::to_string(protos.back().size()) +
                                  " values but the signal length is " + std::to_string(D));
            }
        }
        return std::make_unique<BlockGmmScoreModel>(std::move(protos), spec.weights, spec.var,
                                                    spec.block_len, std::move(sched));
    }
    std::vector<GmmComponent> comps;
    for (std::size_t c = 0; c < spec.weights.size(); ++c) {
        comps.push_back(GmmComponent{spec.weights[c], std::vector<double>(D, spec.means[c]),
                                     std::vector<double>(D, spec.vars[c])});
    }
    return std::make_unique<GmmScoreModel>(GmmPrior(std::move(comps)), std::move(sched));
}

// Builds the configured embedder.
inline std::unique_ptr<Embedder> make_embedder(const RunConfig& rc) {
    if (rc.emb_type == "spectral_contrast") {
        return std::make_unique<SpectralContrastEmbedder>(rc.emb_frame, rc.emb_hop,
                                                          rc.emb_bands, rc.emb_sharpness);
    }
    return std::make_unique<BandEnergyEmbedder>(rc.emb_frame, rc.emb_hop, rc.emb_bands);
}

}  // namespace sepdiff
