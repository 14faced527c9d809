#pragma once
#include <map>
#include <string>
#include <vector>

#include "lanp/augmentation.hpp"
#include "lanp/datagen.hpp"
#include "lanp/training.hpp"

namespace lanp {

// Flat key=value run configuration with '#' comments. Every key is declared
// in the schema with a type, default, and doc line; unknown keys are
// rejected with their line numbers. The fully resolved text (render()) is
// echoed into checkpoints and reports.
class RunConfig {
public:
    enum class Type { kInt, kInt64, kUInt64, kDouble, kBool, kString, kEnum, kDoubleList };

    struct KeySpec {
        std::string key;
        Type type;
        std::string default_value;
        std::vector<std::string> choices; // kEnum only
        std::string doc;
    };

    RunConfig(); // defaults

    static RunConfig from_file(const std::string& path);
    static RunConfig from_text(const std::string& text, const std::string& origin = "<config>");
    static const std::vector<KeySpec>& schema();

    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;
    int get_int(const std::string& key) const;
    std::int64_t get_int64(const std::string& key) const;
    std::uint64_t get_uint64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;

    // sorted key=value lines, one per schema entry
    std::string render() const;

    ModelConfig model_config() const;
    TrainConfig train_config() const;
    ContextRule context_rule() const;
    Sim1Options sim1_options() const;
    Sim2Options sim2_options() const;

private:
    const KeySpec& spec(const std::string& key) const;
    void check_value(const KeySpec& spec, const std::string& value) const;

    std::map<std::string, std::string> values_;
};

std::vector<double> parse_double_list(const std::string& text);

} // namespace lanp
