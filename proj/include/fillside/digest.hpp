#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace fillside::digest {

// Streaming SHA-256 (OpenSSL EVP behind the scenes).
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::span<const std::uint8_t> data);
    void update(const std::string& data);
    std::string finish_hex();

private:
    void* ctx_;
};

std::string sha256_hex(const std::string& data);
std::string sha256_file_hex(const std::string& path);

} // namespace fillside::digest
