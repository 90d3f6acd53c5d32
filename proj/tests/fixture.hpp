#pragma once

#include <memory>
#include <vector>

#include "attestfl/adversary.hpp"
#include "attestfl/protocol/client.hpp"
#include "attestfl/protocol/wire.hpp"
#include "attestfl/verifier.hpp"

// Small federation wired to a verifier: 4 clients of 20 samples each.
struct MiniFederation {
  attestfl::Architecture arch = attestfl::mlp_architecture(16, {8}, 10);
  attestfl::Hyperparams hp;
  std::vector<attestfl::Client> clients;
  std::unique_ptr<attestfl::VerifierState> verifier;
  attestfl::ModelParams global;

  explicit MiniFederation(std::size_t n = 4, std::uint64_t seed = 3) {
    using namespace attestfl;
    SyntheticSpec spec;
    auto data = SyntheticTask(spec).sample(20 * n, seed);
    auto parts = partition_indices(data, n, PartitionMode::kIid, seed);
    verifier = std::make_unique<VerifierState>(arch, hp, true, seed);
    for (std::size_t i = 0; i < n; ++i) {
      auto id = static_cast<std::uint32_t>(i);
      clients.emplace_back(id, seed, data.subset(parts[i]), hp, arch.size());
      verifier->register_client(id, clients.back().verify_key(),
                                dataset_digest(clients.back().shard()),
                                clients.back().shard().size());
    }
    global = ModelParams::xavier(arch, seed);
  }

  std::vector<std::uint32_t> ids() const {
    std::vector<std::uint32_t> out;
    for (const auto& c : clients) out.push_back(c.id());
    return out;
  }

  std::map<std::uint32_t, attestfl::Challenge> begin(std::uint32_t round) {
    return verifier->begin_round(round, ids());
  }

  attestfl::RoundBroadcast broadcast(std::uint32_t round, const attestfl::Challenge& ch) const {
    return {round, global, ch};
  }
};
