// SPDX-License-Identifier: Apache-2.0
//
// framemind gen | train | eval | ablate-bonus
//
// Exit codes: 0 success, 2 usage/config/input error, 3 degenerate training.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "framemind/app.hpp"

namespace fm = framemind;

int main(int argc, char** argv) {
    CLI::App app{"FrameMind toy-scale trainer"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "only print warnings and errors");

    std::size_t count = 0;
    std::uint64_t seed = 0;
    std::string out;
    auto* gen = app.add_subcommand("gen", "generate a synthetic video-QA dataset");
    gen->add_option("--count", count, "number of videos")->required();
    gen->add_option("--seed", seed, "generator seed")->required();
    gen->add_option("--out", out, "output directory")->required();

    std::string config_path;
    auto* train = app.add_subcommand("train", "train the toy policy");
    train->add_option("--config", config_path, "run config (JSON)")->required();

    std::string checkpoint, dataset, report_path;
    std::optional<int> rung;
    auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
    eval->add_option("--checkpoint", checkpoint)->required();
    eval->add_option("--dataset", dataset)->required();
    eval->add_option("--rung", rung, "ladder rung to sample initial frames at (default: config eval_rung)");
    eval->add_option("--out", report_path, "also write the report here");

    auto* ablate = app.add_subcommand("ablate-bonus", "paired runs with and without the exploration bonus");
    ablate->add_option("--config", config_path, "run config (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : fm::exit_code::usage;
    }
    if (quiet) fm::log::set_level(fm::log::Level::warning);

    try {
        if (*gen) {
            const auto s = fm::cmd_gen(count, seed, out);
            std::cout << nlohmann::json{{"videos", s.videos}, {"tasks", s.tasks}, {"out", out}}.dump() << '\n';
        } else if (*train) {
            const auto cfg = fm::load_config(config_path);
            fm::cmd_train(cfg);
            std::cout << nlohmann::json{{"out_dir", cfg.out_dir}}.dump() << '\n';
        } else if (*eval) {
            const auto report = fm::to_json(fm::cmd_eval(checkpoint, dataset, rung));
            std::cout << report.dump(2) << '\n';
            if (!report_path.empty()) {
                std::ofstream f(report_path);
                if (!f) throw fm::UsageError("cannot write " + report_path);
                f << report.dump(2) << '\n';
            }
        } else if (*ablate) {
            const auto cfg = fm::load_config(config_path);
            const auto r = fm::cmd_ablate_bonus(cfg);
            std::cout << nlohmann::json{{"bonus_accuracy", r.bonus.accuracy()},
                                        {"strict_accuracy", r.strict.accuracy()},
                                        {"bonus_both_tools", r.bonus.both_tools_rate},
                                        {"strict_both_tools", r.strict.both_tools_rate}}
                             .dump()
                      << '\n';
        }
    } catch (const fm::DegenerateTrainingError& e) {
        fm::log::error("{}", e.what());
        return fm::exit_code::degenerate;
    } catch (const fm::ConfigError& e) {
        fm::log::error("{}", e.what());
        return fm::exit_code::usage;
    } catch (const fm::UsageError& e) {
        fm::log::error("{}", e.what());
        return fm::exit_code::usage;
    } catch (const std::filesystem::filesystem_error& e) {
        fm::log::error("{}", e.what());
        return fm::exit_code::usage;
    }
    return fm::exit_code::ok;
}
