#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fillside::hex {

bool is_hex_string(const std::string& s, std::size_t n_digits);

std::string to_lower_hex(std::span<const std::uint8_t> bytes, bool prefix = true);
std::vector<std::uint8_t> from_hex(const std::string& s); // throws on malformed input

// 0x-prefixed JSON-RPC quantity <-> uint64.
std::string to_quantity(std::uint64_t v);
std::uint64_t parse_quantity(const std::string& s);

// Big-endian uint256 word helpers.
bool is_zero_word(std::span<const std::uint8_t> word32);
std::string word_to_decimal(std::span<const std::uint8_t> word32);
bool word_to_u64(std::span<const std::uint8_t> word32, std::uint64_t& out);

// Last 20 bytes of a 32-byte topic as a lowercase 0x address.
std::string topic_to_address(std::span<const std::uint8_t> word32);

std::array<std::uint8_t, 32> keccak256(std::span<const std::uint8_t> data);
std::string keccak256_hex(const std::string& data);

} // namespace fillside::hex
