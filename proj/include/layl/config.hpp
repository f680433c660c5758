#pragma once
#include <map>
#include <string>
#include <vector>

#include "layl/eval.hpp"
#include "layl/trainer.hpp"

namespace layl {

// Minimal TOML subset: [sections], key = value with strings, numbers,
// booleans, and flat arrays; # comments. Enough for run configs without
// pulling in a full parser.
struct TomlValue {
    enum class Kind { String, Number, Boolean, Array };
    Kind kind = Kind::String;
    std::string text;
    double number = 0.0;
    bool boolean = false;
    std::vector<TomlValue> items;
};

struct TomlDoc {
    // Keys are "section.key"; top-level keys have no dot.
    std::map<std::string, TomlValue> values;

    bool has(const std::string& key) const { return values.count(key) > 0; }
    static TomlDoc parse(const std::string& text);
    static TomlDoc parse_file(const std::string& path);
};

// Full run description: scene composition, training schedule, rendering,
// guidance provider, loss weights, freeze lists, and evaluation settings.
struct RunConfig {
    int k = 1;
    int n_layouts = 1;
    MlpConfig mlp;

    TrainConfig train;

    std::vector<std::string> assets;  // arrange-mode frozen volumes
    std::string target;               // decompose-mode target volume

    std::string provider = "mock";
    std::string target_image;
    std::string endpoint;
    double bridge_timeout = 30.0;
    int bridge_retries = 2;

    std::vector<int> freeze_fields;
    std::vector<int> freeze_transforms;  // flattened layout-major index n*K+k

    std::string eval_scorer = "iou-oracle";
    std::vector<std::string> eval_targets;
    std::vector<std::string> eval_texts;
    EvalConfig eval;
    std::vector<uint64_t> eval_seeds = {0, 1, 2};
};

// Rejects unknown keys so typos fail loudly.
RunConfig parse_run_config(const std::string& toml_text);
RunConfig load_run_config(const std::string& path);

}  // namespace layl
