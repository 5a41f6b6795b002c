#pragma once

#include <cstdint>
#include <filesystem>

#include "cizsl/net.hpp"

namespace cizsl {

inline constexpr char kCheckpointMagic[4] = {'C', 'Z', 'S', 'L'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct NetworkPair {
  Generator<double> generator;
  Discriminator<double> discriminator;
};

/// "CZSL", u16 version, u32 noise dim, u32 network count (embed, trunk,
/// discriminator); per network a u32 layer count and per layer u32 in,
/// u32 out, u8 activation, f64 slope, followed by that network's
/// parameters as little-endian f64 in flattened order.
void save_checkpoint(const std::filesystem::path& path, const Generator<double>& generator,
                     const Discriminator<double>& discriminator);
NetworkPair load_checkpoint(const std::filesystem::path& path);

}  // namespace cizsl
