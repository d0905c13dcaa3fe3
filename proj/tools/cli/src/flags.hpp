#pragma once

#include <CLI11.hpp>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace meshseq::cli {

// Registers CLI11 options under snake_case keys so a flat JSON config can
// address them and the resolved values can be echoed back.
class FlagSet {
 public:
  explicit FlagSet(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& key, T& value, const std::string& help) {
    auto* opt = app_->add_option("--" + dashed(key), value, help)->capture_default_str();
    remember(key, opt, [key, &value](nlohmann::json& j) { j[key] = value; });
    return opt;
  }

  CLI::Option* flag(const std::string& key, bool& value, const std::string& help) {
    auto* opt = app_->add_flag("--" + dashed(key), value, help);
    remember(key, opt, [key, &value](nlohmann::json& j) { j[key] = value; });
    return opt;
  }

  CLI::Option* option(const std::string& key) const {
    const auto it = options_.find(key);
    return it == options_.end() ? nullptr : it->second;
  }
  bool given(const std::string& key) const { return option(key)->count() > 0; }
  CLI::App* app() const { return app_; }

  // Config entries become ordinary arguments placed before the user's own,
  // so with last-wins options a flag always overrides the file.
  std::vector<std::string> config_arguments(const nlohmann::json& config,
                                            std::vector<std::string>& unknown) const {
    std::vector<std::string> args;
    for (const auto& [key, value] : config.items()) {
      if (!options_.count(key)) {
        unknown.push_back(key);
        continue;
      }
      std::string text;
      if (value.is_string()) {
        text = value.get<std::string>();
      } else if (value.is_boolean()) {
        text = value.get<bool>() ? "true" : "false";
      } else {
        text = value.dump();
      }
      args.push_back("--" + dashed(key) + "=" + text);
    }
    return args;
  }

  nlohmann::json materialize() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& d : dumpers_) d(j);
    return j;
  }

  static std::string dashed(std::string key) {
    for (auto& c : key) {
      if (c == '_') c = '-';
    }
    return key;
  }

 private:
  void remember(const std::string& key, CLI::Option* opt, std::function<void(nlohmann::json&)> dump) {
    options_[key] = opt;
    dumpers_.push_back(std::move(dump));
  }

  CLI::App* app_;
  std::map<std::string, CLI::Option*> options_;
  std::vector<std::function<void(nlohmann::json&)>> dumpers_;
};

}  // namespace meshseq::cli
