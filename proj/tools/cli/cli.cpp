#include "cli.hpp"

#include <algorithm>
#include <iostream>
#include <set>

#include "command.hpp"
#include "latprobe/error.hpp"
#include "latprobe/util/files.hpp"

namespace latprobe::cli {

Command::Command(CLI::App& parent, const std::string& name, const std::string& description)
    : app_(parent.add_subcommand(name, description)) {
  app_->add_option("--config", config_path_, "JSON config file; flags override its values");
  required("out", out_str_, "output directory");
}

void Command::resolve() {
  std::set<std::string> from_flags;
  for (const auto& b : bindings_) {
    if (b.opt->count() > 0) from_flags.insert(b.name);
  }
  if (!config_path_.empty()) {
    json cfg;
    try {
      cfg = json::parse(util::read_file(config_path_));
    } catch (const json::parse_error& e) {
      fail(ErrorKind::schema, config_path_ + ": invalid JSON: " + e.what());
    }
    require(cfg.is_object(), ErrorKind::schema, config_path_ + ": config must be a JSON object");
    for (const auto& [k, v] : cfg.items()) {
      if (k == "command") {
        require(v == app_->get_name(), ErrorKind::schema,
                config_path_ + ": config is for command " + v.dump() + ", not '" + app_->get_name() + "'");
        continue;
      }
      auto it = std::find_if(bindings_.begin(), bindings_.end(), [&](const Binding& b) { return b.name == k; });
      require(it != bindings_.end(), ErrorKind::schema,
              config_path_ + ": unknown key '" + k + "' for command '" + app_->get_name() + "'");
      if (from_flags.count(k) != 0) continue;
      try {
        it->assign(v);
      } catch (const json::exception& e) {
        fail(ErrorKind::schema, config_path_ + ": key '" + k + "' has the wrong type: " + e.what());
      }
      from_flags.insert(k);
    }
  }
  for (const auto& b : bindings_) {
    require(!b.required || from_flags.count(b.name) != 0, ErrorKind::schema,
            "missing required key '" + b.name + "' (flag --" + b.name + " or config)");
  }
  out_ = out_str_;
  std::filesystem::create_directories(out_);

  std::string prov = "key\tpath\tfnv1a64\tbytes\n";
  for (const auto& name : inputs_) {
    auto it = std::find_if(bindings_.begin(), bindings_.end(), [&](const Binding& b) { return b.name == name; });
    const json v = it->dump();
    std::vector<std::string> paths;
    if (v.is_array()) {
      for (const auto& p : v) paths.push_back(p.get<std::string>());
    } else {
      paths.push_back(v.get<std::string>());
    }
    for (const auto& p : paths) {
      if (p.empty()) continue;
      const std::string bytes = util::read_file(p);
      prov += name + '\t' + p + '\t' + util::hex64(util::fnv1a64(bytes)) + '\t' + std::to_string(bytes.size()) + '\n';
    }
  }
  write("config.json", snapshot().dump(2) + "\n");
  write("provenance.tsv", prov);
}

json Command::snapshot() const {
  json j = json::object();
  j["command"] = app_->get_name();
  for (const auto& b : bindings_) j[b.name] = b.dump();
  return j;
}

std::string Command::config_hash() const { return util::hex64(util::fnv1a64(snapshot().dump())); }

void Command::write(const std::string& name, const std::string& bytes) const {
  util::write_file_atomic(out_ / name, bytes);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-subset probing and bias measurement toolkit", "latprobe"};
  app.require_subcommand(1);
  auto probe_cmds = register_probe_commands(app);
  auto bias_cmds = register_bias_commands(app);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    for (auto* list : {&probe_cmds, &bias_cmds}) {
      for (auto& c : *list) {
        if (c->app()->parsed() && c->action) {
          c->resolve();
          c->action();
          return 0;
        }
      }
    }
    err << "error: no runnable subcommand given\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace latprobe::cli
