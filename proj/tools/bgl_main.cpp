// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include <string>

#include <CLI11.hpp>

#include "bgl/harness/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"bilevel training experiments: dataset synthesis, estimator "
               "verification, strategy comparison, transfer"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* cmd;
    bgl::CommandArgs args;
  };
  auto add_verb = [&](const std::string& name, const std::string& help) {
    Sub sub;
    sub.cmd = app.add_subcommand(name, help);
    sub.cmd->add_option("--config", sub.args.config_path, "config file (INI-style)");
    sub.cmd->add_option("--out", sub.args.out_dir, "output directory")->required();
    sub.cmd->add_option("--seed", sub.args.seed, "base seed");
    return sub;
  };

  Sub synth = add_verb("synth", "synthesize a paired clean/raw dataset");
  Sub verify = add_verb("verify", "run the estimator invariant suite");
  Sub compare = add_verb("compare", "train naive/tbgl/ibgl under an equal outer budget");
  Sub transfer = add_verb("transfer", "adapt a fresh head on frozen generators");

  CLI11_PARSE(app, argc, argv);

  if (synth.cmd->parsed()) return bgl::cmd_synth(synth.args);
  if (verify.cmd->parsed()) return bgl::cmd_verify(verify.args);
  if (compare.cmd->parsed()) return bgl::cmd_compare(compare.args);
  if (transfer.cmd->parsed()) return bgl::cmd_transfer(transfer.args);
  return 2;
}
