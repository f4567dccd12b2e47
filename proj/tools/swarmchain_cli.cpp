#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "swarmchain/harness.hpp"

using namespace swarmchain;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitConfig = 2;

void print_summary(const RunReport& report, std::ostream& out) {
    out << "converged:   " << (report.converged ? "yes" : "no") << '\n'
        << "tipHash:     " << report.tip_hash << '\n'
        << "chainLength: " << report.chain_length << '\n';
    for (const auto& [id, m] : report.per_miner) {
        out << "  " << id << "  chain=" << m.chain_length << "  pending=" << m.pending_count
            << "  peers=" << m.peer_count << '\n';
    }
}

void write_report_file(const RunReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << canonical_encode(to_value(report)) << '\n';
    if (!out) throw IoError("cannot write " + path);
}

/// Splits an interactive line into whitespace-separated tokens.
std::vector<std::string> tokenize(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> tokens;
    std::string token;
    while (in >> token) tokens.push_back(token);
    return tokens;
}

/// Parses "--flag value" pairs after the command word. Throws
/// std::invalid_argument on a dangling flag or an unknown token.
std::map<std::string, std::string> parse_flags(const std::vector<std::string>& tokens) {
    std::map<std::string, std::string> flags;
    for (std::size_t i = 1; i < tokens.size(); i += 2) {
        if (tokens[i].rfind("--", 0) != 0) {
            throw std::invalid_argument("expected a --flag, got '" + tokens[i] + "'");
        }
        if (i + 1 >= tokens.size()) {
            throw std::invalid_argument("flag '" + tokens[i] + "' needs a value");
        }
        flags[tokens[i].substr(2)] = tokens[i + 1];
    }
    return flags;
}

void interactive_submit(Network& net, const std::map<std::string, std::string>& flags) {
    for (const auto& [key, value] : flags) {
        (void)value;
        if (key != "method" && key != "contract" && key != "sender" && key != "nonce" &&
            key != "timestamp" && key != "params") {
            throw std::invalid_argument("unknown flag --" + key);
        }
    }
    Value params = Value::object();
    if (auto it = flags.find("params"); it != flags.end()) {
        params = Value::parse(it->second, nullptr, false);
        if (params.is_discarded() || !params.is_object()) {
            throw std::invalid_argument("--params must be a JSON object");
        }
    }
    if (auto it = flags.find("method"); it != flags.end()) {
        if (params.contains("method")) {
            throw std::invalid_argument("--method conflicts with params.method");
        }
        params["method"] = it->second;
    }
    std::string sender = flags.count("sender") ? flags.at("sender") : "client";
    std::string contract = flags.count("contract") ? flags.at("contract") : "counter";
    std::optional<std::uint64_t> nonce;
    if (flags.count("nonce")) nonce = std::stoull(flags.at("nonce"));
    std::optional<std::int64_t> timestamp;
    if (flags.count("timestamp")) timestamp = std::stoll(flags.at("timestamp"));

    std::string tx_id = net.submit_transaction(sender, contract, std::move(params), nonce, timestamp);
    net.settle();
    std::cout << "txId " << tx_id << '\n';
}

void interactive_dump(Network& net, const std::map<std::string, std::string>& flags) {
    if (!flags.count("miner") || !flags.count("out")) {
        throw std::invalid_argument("dump needs --miner ID --out FILE");
    }
    Chain chain = net.chain_of(flags.at("miner"));
    write_chain_file(chain, flags.at("out"));
    std::cout << "wrote " << chain.size() << " blocks to " << flags.at("out") << '\n';
}

void interactive_loop(Network& net) {
    std::cout << "commands: submit --method M [--contract C] [--sender S] [--params JSON]"
                 " [--nonce N] [--timestamp T] | dump --miner ID --out FILE | status | quit\n";
    std::string line;
    std::cout << "> " << std::flush;
    while (std::getline(std::cin, line)) {
        std::vector<std::string> tokens = tokenize(line);
        try {
            if (tokens.empty()) {
            } else if (tokens[0] == "quit" || tokens[0] == "exit") {
                break;
            } else if (tokens[0] == "submit") {
                interactive_submit(net, parse_flags(tokens));
            } else if (tokens[0] == "dump") {
                interactive_dump(net, parse_flags(tokens));
            } else if (tokens[0] == "status") {
                print_summary(net.report(), std::cout);
            } else {
                std::cout << "unknown command '" << tokens[0] << "'\n";
            }
        } catch (const std::exception& e) {
            std::cout << "error: " << e.what() << '\n';
        }
        std::cout << "> " << std::flush;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale blockchain-on-choreography simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string report_path;
    std::uint64_t seed_override = 0;
    bool interactive = false;
    auto* run = app.add_subcommand("run", "Run a scenario file and print its report");
    run->add_option("--config", config_path, "scenario file (JSON object)")->required();
    auto* run_seed = run->add_option("--seed", seed_override, "override the scenario seed");
    run->add_option("--report", report_path, "write the full report as canonical JSON");
    run->add_flag("--interactive", interactive,
                  "read submit/dump/status commands from stdin after the scenario settles");

    auto* submit = app.add_subcommand(
        "submit", "Submit a transaction (available inside `run --interactive`)");
    std::string unused;
    submit->add_option("--method", unused, "contract method");
    submit->add_option("--contract", unused, "contract address (default counter)");
    submit->add_option("--sender", unused, "sender id (default client)");

    std::string dump_config;
    std::string dump_miner;
    std::string dump_out;
    std::uint64_t dump_seed = 0;
    auto* dump = app.add_subcommand("dump", "Run a scenario and dump one miner's chain");
    dump->add_option("--config", dump_config, "scenario file (JSON object)")->required();
    dump->add_option("--miner", dump_miner, "miner id, e.g. M1")->required();
    dump->add_option("--out", dump_out, "output json-lines file")->required();
    auto* dump_seed_opt = dump->add_option("--seed", dump_seed, "override the scenario seed");

    std::string verify_path;
    std::uint32_t difficulty_bits = kDefaultDifficultyBits;
    std::size_t block_cap = kDefaultBlockCap;
    auto* verify = app.add_subcommand("verify", "Validate a json-lines chain file");
    verify->add_option("file", verify_path, "chain file, one canonical block per line")->required();
    verify->add_option("--difficulty-bits", difficulty_bits, "required leading zero bits");
    verify->add_option("--block-cap", block_cap, "max transactions per block");

    std::string replay_path;
    std::uint32_t replay_bits = kDefaultDifficultyBits;
    std::size_t replay_cap = kDefaultBlockCap;
    std::int64_t replay_timeout = 500;
    auto* replay = app.add_subcommand("replay-states",
                                      "Re-derive contract states from a chain file");
    replay->add_option("file", replay_path, "chain file, one canonical block per line")->required();
    replay->add_option("--difficulty-bits", replay_bits, "required leading zero bits");
    replay->add_option("--block-cap", replay_cap, "max transactions per block");
    replay->add_option("--contract-timeout-ms", replay_timeout, "contract execution budget");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) {
            ScenarioConfig config = load_scenario_file(config_path);
            if (*run_seed) config.seed = seed_override;
            Network net(config);
            RunReport report = net.run();
            print_summary(report, std::cout);
            if (!report_path.empty()) write_report_file(report, report_path);
            if (interactive) interactive_loop(net);
            return kExitOk;
        }
        if (*submit) {
            std::cerr << "submit needs a live network; start one with"
                         " `run --config FILE --interactive`\n";
            return kExitConfig;
        }
        if (*dump) {
            ScenarioConfig config = load_scenario_file(dump_config);
            if (*dump_seed_opt) config.seed = dump_seed;
            Network net(config);
            net.run();
            Chain chain = net.chain_of(dump_miner);
            write_chain_file(chain, dump_out);
            std::cout << "wrote " << chain.size() << " blocks to " << dump_out << '\n';
            return kExitOk;
        }
        if (*verify) {
            VerifyResult result = verify_chain_file(verify_path, difficulty_bits, block_cap);
            if (result.ok) {
                std::cout << "ok\n";
                return kExitOk;
            }
            std::cout << "error at line " << result.line << ": " << result.kind << ": "
                      << result.message << '\n';
            return kExitValidation;
        }
        if (*replay) {
            Chain chain;
            try {
                chain = read_chain_file(replay_path);
            } catch (const DecodeError& e) {
                std::cerr << "parse error: " << e.what() << '\n';
                return kExitValidation;
            }
            DeterministicExecutor executor(0);
            Bus bus(executor);
            ChoreographyEngine engine(executor, bus);
            ContractRegistry contracts(engine);
            contracts.register_contract(sample_counter_contract());
            std::map<std::string, Value> outcomes;
            std::map<std::string, Value> states;
            try {
                states = replay_contract_states(chain, contracts, replay_timeout, "replay",
                                                replay_bits, replay_cap, &outcomes);
            } catch (const InvalidChain& e) {
                std::cerr << "invalid chain: " << e.what() << '\n';
                return kExitValidation;
            }
            Value out{{"contractStates", Value::object()}, {"txOutcomes", Value::object()}};
            for (const auto& [address, state] : states) out["contractStates"][address] = state;
            for (const auto& [tx, outcome] : outcomes) out["txOutcomes"][tx] = outcome;
            std::cout << canonical_encode(out) << '\n';
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DecodeError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitOk;
}
