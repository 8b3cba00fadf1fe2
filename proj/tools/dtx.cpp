// dtx: experiment harness for discount-factor Taylor expansions.
//
//   dtx <command> [--config FILE] [--seed N] [--out PATH] [--no-timestamp] [--<key> VALUE ...]
//
// Every config key of a command is also a flag (underscores become dashes);
// flags override the config file. Values are parsed as JSON when possible, so
// lists are written as e.g. --sigmas '[0,0.5,1]'.

#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dtx/errors.hpp"
#include "dtx/experiments.hpp"
#include "dtx/io.hpp"

namespace {

using nlohmann::json;

enum Exit { ok = 0, parameter = 2, numeric = 3, io = 4 };

struct Command {
    std::string name;
    std::string help;
    json defaults;
    std::function<std::string(const json &config, bool timestamp)> run;
};

std::string dashed(std::string key) {
    for (auto &c : key) {
        if (c == '_') {
            c = '-';
        }
    }
    return key;
}

json parse_flag_value(const std::string &raw) {
    try {
        return json::parse(raw);
    } catch (const json::exception &) {
        return raw;
    }
}

std::string with_meta_json(json body, const json &config, bool timestamp) {
    body["meta"] = dtx::output_metadata(config, timestamp);
    return dtx::render_json(body);
}

std::vector<Command> commands() {
    using namespace dtx;
    std::vector<Command> cmds;

    cmds.push_back({"gen-mdp", "Generate a random Dirichlet MDP and write it as JSON", GenMdpConfig{}.to_json(),
                    [](const json &j, bool ts) {
                        const auto c = GenMdpConfig::from_json(j);
                        return with_meta_json(to_json(c.mdp.make(c.seed)), c.to_json(), ts);
                    }});

    cmds.push_back({"fig-tradeoff", "Exact and sampled expansion error against the order K (CSV)",
                    TradeoffConfig{}.to_json(), [](const json &j, bool ts) {
                        const auto c = TradeoffConfig::from_json(j);
                        const auto res = run_tradeoff(c);
                        json cfg = c.to_json();
                        cfg["target_value"] = res.target;
                        cfg["excluded_samples"] = res.excluded;
                        return tradeoff_table(res).render(output_metadata(cfg, ts));
                    }});

    cmds.push_back({"fig-optimal-k", "Optimal order K* against base-estimate noise sigma (CSV)",
                    OptimalKConfig{}.to_json(), [](const json &j, bool ts) {
                        const auto c = OptimalKConfig::from_json(j);
                        return optimal_k_table(run_optimal_k(c)).render(output_metadata(c.to_json(), ts));
                    }});

    cmds.push_back({"grad-demo", "Full / first / second partial gradients with finite-difference residuals (JSON)",
                    GradDemoConfig{}.to_json(), [](const json &j, bool ts) {
                        const auto c = GradDemoConfig::from_json(j);
                        return with_meta_json(run_grad_demo(c), c.to_json(), ts);
                    }});

    cmds.push_back({"bounds", "Empirical coverage of the phased-TD error bound (JSON)", BoundsConfig{}.to_json(),
                    [](const json &j, bool ts) {
                        const auto c = BoundsConfig::from_json(j);
                        return with_meta_json(to_json(run_bounds(c)), c.to_json(), ts);
                    }});

    cmds.push_back({"train", "Tabular softmax policy optimization learning curves (CSV)",
                    TrainExperimentConfig{}.to_json(), [](const json &j, bool ts) {
                        const auto c = TrainExperimentConfig::from_json(j);
                        return train_table(c, run_train(c)).render(output_metadata(c.to_json(), ts));
                    }});
    return cmds;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Taylor expansions of discount factors: oracles, estimators and experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(dtx::kVersion));

    auto cmds = commands();
    struct Bound {
        CLI::App *sub;
        std::string config_file;
        std::string out;
        bool no_timestamp = false;
        std::map<std::string, std::optional<std::string>> flags;
    };
    std::vector<Bound> bound(cmds.size());
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        auto &b = bound[i];
        b.sub = app.add_subcommand(cmds[i].name, cmds[i].help);
        b.sub->add_option("--config", b.config_file, "JSON config file")->check(CLI::ExistingFile);
        b.sub->add_option("--out", b.out, "output path (default: stdout)");
        b.sub->add_flag("--no-timestamp", b.no_timestamp, "omit the timestamp from the metadata");
        for (const auto &item : cmds[i].defaults.items()) {
            auto &slot = b.flags[item.key()];
            b.sub->add_option("--" + dashed(item.key()), slot, "default: " + item.value().dump());
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? Exit::ok : Exit::parameter;
    }

    for (std::size_t i = 0; i < cmds.size(); ++i) {
        auto &b = bound[i];
        if (!b.sub->parsed()) {
            continue;
        }
        try {
            json config = json::object();
            if (!b.config_file.empty()) {
                config = dtx::read_json_file(b.config_file);
                if (!config.is_object()) {
                    throw dtx::parameter_error("config file must hold a JSON object");
                }
            }
            for (const auto &[key, value] : b.flags) {
                if (value) {
                    config[key] = parse_flag_value(*value);
                }
            }
            dtx::write_output(b.out, cmds[i].run(config, !b.no_timestamp));
            return Exit::ok;
        } catch (const dtx::io_error &e) {
            std::cerr << "dtx " << cmds[i].name << ": I/O error: " << e.what() << '\n';
            return Exit::io;
        } catch (const dtx::numeric_error &e) {
            std::cerr << "dtx " << cmds[i].name << ": numeric error: " << e.what() << '\n';
            return Exit::numeric;
        } catch (const dtx::non_absorbing_error &e) {
            std::cerr << "dtx " << cmds[i].name << ": numeric error: " << e.what() << '\n';
            return Exit::numeric;
        } catch (const dtx::range_error &e) {
            std::cerr << "dtx " << cmds[i].name << ": numeric error: " << e.what() << '\n';
            return Exit::numeric;
        } catch (const dtx::truncation_error &e) {
            std::cerr << "dtx " << cmds[i].name << ": numeric error: " << e.what() << '\n';
            return Exit::numeric;
        } catch (const dtx::error &e) {
            std::cerr << "dtx " << cmds[i].name << ": parameter error: " << e.what() << '\n';
            return Exit::parameter;
        }
    }
    return Exit::parameter;
}
