#include "layl/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "layl/errors.hpp"

namespace layl {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Strips a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

TomlValue parse_scalar(const std::string& raw, int line_no) {
    TomlValue v;
    std::string s = trim(raw);
    if (s.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty value");
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"')
            throw ConfigError("config line " + std::to_string(line_no) + ": unterminated string");
        v.kind = TomlValue::Kind::String;
        v.text = s.substr(1, s.size() - 2);
        return v;
    }
    if (s == "true" || s == "false") {
        v.kind = TomlValue::Kind::Boolean;
        v.boolean = s == "true";
        return v;
    }
    char* end = nullptr;
    double num = std::strtod(s.c_str(), &end);
    if (end == nullptr || *end != '\0')
        throw ConfigError("config line " + std::to_string(line_no) + ": cannot parse value '" + s +
                          "'");
    v.kind = TomlValue::Kind::Number;
    v.number = num;
    return v;
}

TomlValue parse_value(const std::string& raw, int line_no) {
    std::string s = trim(raw);
    if (!s.empty() && s.front() == '[') {
        if (s.back() != ']')
            throw ConfigError("config line " + std::to_string(line_no) + ": unterminated array");
        TomlValue v;
        v.kind = TomlValue::Kind::Array;
        std::string inner = s.substr(1, s.size() - 2);
        std::string current;
        bool in_string = false;
        for (char c : inner) {
            if (c == '"') in_string = !in_string;
            if (c == ',' && !in_string) {
                if (!trim(current).empty()) v.items.push_back(parse_scalar(current, line_no));
                current.clear();
            } else {
                current.push_back(c);
            }
        }
        if (!trim(current).empty()) v.items.push_back(parse_scalar(current, line_no));
        return v;
    }
    return parse_scalar(s, line_no);
}

}  // namespace

TomlDoc TomlDoc::parse(const std::string& text) {
    TomlDoc doc;
    std::istringstream is(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty())
                throw ConfigError("config line " + std::to_string(line_no) + ": empty section");
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        std::string full = section.empty() ? key : section + "." + key;
        if (doc.values.count(full))
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" +
                              full + "'");
        doc.values[full] = parse_value(s.substr(eq + 1), line_no);
    }
    return doc;
}

TomlDoc TomlDoc::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config " + path);
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse(content);
}

namespace {

class ConfigReader {
public:
    explicit ConfigReader(const TomlDoc& doc) : doc_(doc) {}

    double number(const std::string& key, double fallback) {
        mark(key);
        auto it = doc_.values.find(key);
        if (it == doc_.values.end()) return fallback;
        require(it->second.kind == TomlValue::Kind::Number, key, "a number");
        return it->second.number;
    }

    int integer(const std::string& key, int fallback) {
        double v = number(key, double(fallback));
        if (v != std::floor(v)) throw ConfigError("config key '" + key + "' must be an integer");
        return int(v);
    }

    std::string text(const std::string& key, const std::string& fallback) {
        mark(key);
        auto it = doc_.values.find(key);
        if (it == doc_.values.end()) return fallback;
        require(it->second.kind == TomlValue::Kind::String, key, "a string");
        return it->second.text;
    }

    std::vector<std::string> strings(const std::string& key) {
        mark(key);
        auto it = doc_.values.find(key);
        std::vector<std::string> out;
        if (it == doc_.values.end()) return out;
        require(it->second.kind == TomlValue::Kind::Array, key, "an array");
        for (const auto& item : it->second.items) {
            if (item.kind != TomlValue::Kind::String)
                throw ConfigError("config key '" + key + "' must be an array of strings");
            out.push_back(item.text);
        }
        return out;
    }

    std::vector<double> numbers(const std::string& key) {
        mark(key);
        auto it = doc_.values.find(key);
        std::vector<double> out;
        if (it == doc_.values.end()) return out;
        require(it->second.kind == TomlValue::Kind::Array, key, "an array");
        for (const auto& item : it->second.items) {
            if (item.kind != TomlValue::Kind::Number)
                throw ConfigError("config key '" + key + "' must be an array of numbers");
            out.push_back(item.number);
        }
        return out;
    }

    std::vector<int> integers(const std::string& key) {
        std::vector<int> out;
        for (double v : numbers(key)) {
            if (v != std::floor(v))
                throw ConfigError("config key '" + key + "' must contain integers");
            out.push_back(int(v));
        }
        return out;
    }

    void reject_unknown() const {
        for (const auto& [key, value] : doc_.values)
            if (!seen_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }

private:
    void mark(const std::string& key) { seen_.insert(key); }
    static void require(bool ok, const std::string& key, const char* what) {
        if (!ok) throw ConfigError("config key '" + key + "' must be " + what);
    }

    const TomlDoc& doc_;
    std::set<std::string> seen_;
};

}  // namespace

RunConfig parse_run_config(const std::string& toml_text) {
    TomlDoc doc = TomlDoc::parse(toml_text);
    ConfigReader r(doc);
    RunConfig cfg;

    cfg.k = r.integer("scene.k", 1);
    cfg.n_layouts = r.integer("scene.n_layouts", 1);
    cfg.train.prompt = r.text("scene.prompt", "");
    cfg.assets = r.strings("scene.assets");
    cfg.target = r.text("scene.target", "");
    cfg.mlp.encoding_octaves = r.integer("scene.encoding_octaves", cfg.mlp.encoding_octaves);
    cfg.mlp.hidden_layers = r.integer("scene.hidden_layers", cfg.mlp.hidden_layers);
    cfg.mlp.hidden_width = r.integer("scene.hidden_width", cfg.mlp.hidden_width);
    cfg.mlp.blob_amplitude = r.number("scene.blob_amplitude", cfg.mlp.blob_amplitude);
    cfg.mlp.blob_sigma = r.number("scene.blob_sigma", cfg.mlp.blob_sigma);
    cfg.mlp.bound_radius = r.number("scene.bound_radius", cfg.mlp.bound_radius);
    cfg.mlp.bound_band = r.number("scene.bound_band", cfg.mlp.bound_band);
    if (cfg.k < 1 || cfg.n_layouts < 1)
        throw ConfigError("scene.k and scene.n_layouts must be >= 1");

    cfg.train.steps = r.integer("train.steps", cfg.train.steps);
    cfg.train.seed = uint64_t(r.integer("train.seed", int(cfg.train.seed)));
    std::string mode = r.text("train.mode", "generate");
    if (mode == "generate")
        cfg.train.mode = RunMode::Generate;
    else if (mode == "arrange")
        cfg.train.mode = RunMode::Arrange;
    else if (mode == "decompose")
        cfg.train.mode = RunMode::Decompose;
    else
        throw ConfigError("train.mode must be generate, arrange, or decompose");
    cfg.train.start_lr = r.number("train.start_lr", cfg.train.start_lr);
    cfg.train.peak_lr = r.number("train.peak_lr", cfg.train.peak_lr);
    cfg.train.end_lr = r.number("train.end_lr", cfg.train.end_lr);
    cfg.train.layout_lr_multiplier =
        r.number("train.layout_lr_multiplier", cfg.train.layout_lr_multiplier);
    cfg.train.textureless_probability =
        r.number("train.textureless_probability", cfg.train.textureless_probability);
    cfg.train.view_ring_count = r.integer("train.view_ring", cfg.train.view_ring_count);
    cfg.train.view_ring_elevation_deg =
        r.number("train.view_ring_elevation", cfg.train.view_ring_elevation_deg);
    if (cfg.train.steps < 1) throw ConfigError("train.steps must be >= 1");
    if (cfg.train.start_lr <= 0 || cfg.train.peak_lr <= 0 || cfg.train.end_lr <= 0)
        throw ConfigError("learning rates must be positive");

    cfg.train.render.width = r.integer("render.width", cfg.train.render.width);
    cfg.train.render.height = r.integer("render.height", cfg.train.render.height);
    cfg.train.render.samples_per_ray =
        r.integer("render.samples_per_ray", cfg.train.render.samples_per_ray);
    cfg.train.render.near = r.number("render.near", cfg.train.render.near);
    cfg.train.render.far = r.number("render.far", cfg.train.render.far);
    std::string shading = r.text("render.shading", "albedo");
    if (shading == "albedo")
        cfg.train.render.shading = ShadingMode::Albedo;
    else if (shading == "textureless")
        cfg.train.render.shading = ShadingMode::Textureless;
    else
        throw ConfigError("render.shading must be albedo or textureless");
    std::string background = r.text("render.background", "random");
    if (background == "random")
        cfg.train.render.background = BackgroundMode::RandomUniform;
    else if (background == "fixed")
        cfg.train.render.background = BackgroundMode::Fixed;
    else
        throw ConfigError("render.background must be random or fixed");
    std::vector<double> bg = r.numbers("render.background_color");
    if (!bg.empty()) {
        if (bg.size() != 3) throw ConfigError("render.background_color needs 3 components");
        cfg.train.render.background_color = {bg[0], bg[1], bg[2]};
    }
    cfg.train.camera.azimuth_min_deg =
        r.number("render.azimuth_min", cfg.train.camera.azimuth_min_deg);
    cfg.train.camera.azimuth_max_deg =
        r.number("render.azimuth_max", cfg.train.camera.azimuth_max_deg);
    cfg.train.camera.elevation_min_deg =
        r.number("render.elevation_min", cfg.train.camera.elevation_min_deg);
    cfg.train.camera.elevation_max_deg =
        r.number("render.elevation_max", cfg.train.camera.elevation_max_deg);
    cfg.train.camera.radius = r.number("render.radius", cfg.train.camera.radius);
    cfg.train.camera.fov_y_deg = r.number("render.fov_y", cfg.train.camera.fov_y_deg);
    cfg.train.render.validate();

    cfg.provider = r.text("guidance.provider", cfg.provider);
    if (cfg.provider != "mock" && cfg.provider != "bridge")
        throw ConfigError("guidance.provider must be mock or bridge");
    cfg.target_image = r.text("guidance.target_image", "");
    cfg.endpoint = r.text("guidance.endpoint", "");
    cfg.train.cfg_strength = r.number("guidance.cfg", cfg.provider == "bridge" ? 200.0 : 0.0);
    cfg.bridge_timeout = r.number("guidance.timeout", cfg.bridge_timeout);
    cfg.bridge_retries = r.integer("guidance.retries", cfg.bridge_retries);

    cfg.train.loss.lambda_acc = r.number("loss.lambda_acc", cfg.train.loss.lambda_acc);
    cfg.train.loss.lambda_empty = r.number("loss.lambda_empty", cfg.train.loss.lambda_empty);
    cfg.train.loss.lambda_rec = r.number("loss.lambda_rec", cfg.train.loss.lambda_rec);
    cfg.train.loss.empty_margin = r.number("loss.empty_margin", cfg.train.loss.empty_margin);
    cfg.train.loss.soft_bin_temperature =
        r.number("loss.soft_bin_temperature", cfg.train.loss.soft_bin_temperature);
    cfg.train.loss.soft_bin_eps = r.number("loss.soft_bin_eps", cfg.train.loss.soft_bin_eps);

    cfg.freeze_fields = r.integers("freeze.fields");
    cfg.freeze_transforms = r.integers("freeze.transforms");

    cfg.eval_scorer = r.text("eval.scorer", cfg.eval_scorer);
    if (cfg.eval_scorer != "iou-oracle" && cfg.eval_scorer != "bridge")
        throw ConfigError("eval.scorer must be iou-oracle or bridge");
    cfg.eval_targets = r.strings("eval.targets");
    cfg.eval_texts = r.strings("eval.texts");
    cfg.eval.num_views = r.integer("eval.num_views", cfg.eval.num_views);
    cfg.eval.view_spacing_deg = 360.0 / double(std::max(1, cfg.eval.num_views));
    cfg.eval.elevation_deg = r.number("eval.elevation", cfg.eval.elevation_deg);
    cfg.eval.seeds = r.integer("eval.seeds", cfg.eval.seeds);
    cfg.eval.iou_resolution = r.integer("eval.iou_resolution", cfg.eval.iou_resolution);
    cfg.eval.iou_threshold = r.number("eval.iou_threshold", cfg.eval.iou_threshold);
    cfg.eval_seeds.clear();
    for (int s = 0; s < cfg.eval.seeds; ++s)
        cfg.eval_seeds.push_back(cfg.train.seed + uint64_t(s));

    r.reject_unknown();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config " + path);
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_run_config(content);
}

}  // namespace layl
