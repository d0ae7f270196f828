#pragma once

// Subcommand plumbing: every option is both a CLI flag (--key) and a JSON
// config key. Explicit flags override the config file; unknown config keys
// are rejected. Each run snapshots the resolved keys to config.json and
// hashes its input files into provenance.tsv.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace latprobe::cli {

using nlohmann::json;

class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description);

  /// Binds `field` to --name and config key `name`. Input paths are hashed into provenance.
  template <class T>
  CLI::Option* key(const std::string& name, T& field, const std::string& help) {
    CLI::Option* opt;
    if constexpr (std::is_same_v<T, bool>) {
      opt = app_->add_flag("--" + name, field, help);
    } else {
      opt = app_->add_option("--" + name, field, help);
      if constexpr (is_vector<T>::value) opt->delimiter(',');
    }
    bindings_.push_back({name, opt, [&field](const json& j) { field = j.get<T>(); },
                         [&field] { return json(field); }, false});
    return opt;
  }

  template <class T>
  CLI::Option* required(const std::string& name, T& field, const std::string& help) {
    CLI::Option* opt = key(name, field, help + " (required)");
    bindings_.back().required = true;
    return opt;
  }

  /// Marks keys whose values are file paths (string or list of strings).
  void inputs(std::vector<std::string> names) { inputs_ = std::move(names); }

  CLI::App* app() const { return app_; }
  const std::filesystem::path& out_dir() const { return out_; }

  /// Applies the config file, checks required keys, writes config.json and provenance.tsv.
  void resolve();

  /// Writes `name` under the output directory atomically.
  void write(const std::string& name, const std::string& bytes) const;

  /// Hash of the resolved config snapshot.
  std::string config_hash() const;

  std::function<void()> action;

 private:
  template <class T>
  struct is_vector : std::false_type {};
  template <class T, class A>
  struct is_vector<std::vector<T, A>> : std::true_type {};

  struct Binding {
    std::string name;
    CLI::Option* opt;
    std::function<void(const json&)> assign;
    std::function<json()> dump;
    bool required;
  };

  json snapshot() const;

  CLI::App* app_;
  std::string config_path_;
  std::filesystem::path out_;
  std::string out_str_;
  std::vector<Binding> bindings_;
  std::vector<std::string> inputs_;
  std::vector<std::string> given_;
};

/// Registers every subcommand on `app`; the returned commands own their state.
std::vector<std::unique_ptr<Command>> register_probe_commands(CLI::App& app);
std::vector<std::unique_ptr<Command>> register_bias_commands(CLI::App& app);

}  // namespace latprobe::cli
