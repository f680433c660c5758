#pragma once
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "layl/losses.hpp"

namespace layl {

std::string base64_encode(const uint8_t* data, size_t len);
std::vector<uint8_t> base64_decode(const std::string& text);

// Images travel as little-endian 32-bit floats, row-major RGB.
std::string image_to_base64(const std::vector<double>& image);
std::vector<double> base64_to_image(const std::string& text);

struct BridgeConfig {
    // "host:port" connects over TCP; "stdio:<command line>" spawns the
    // command and speaks over its stdin/stdout.
    std::string endpoint;
    double timeout_seconds = 30.0;
    int max_retries = 2;
};

// Newline-delimited JSON client for an external guidance/scorer service.
// Requests carry strictly increasing ids and run one at a time; responses
// are matched by id, so stale replies from earlier attempts are skipped.
class BridgeGuidance final : public GuidanceProvider {
public:
    explicit BridgeGuidance(BridgeConfig cfg);
    ~BridgeGuidance() override;

    BridgeGuidance(const BridgeGuidance&) = delete;
    BridgeGuidance& operator=(const BridgeGuidance&) = delete;

    std::vector<double> denoise(const std::vector<double>& z_t, int width, int height, double t,
                                const std::string& prompt, double cfg_strength) override;
    double score(const std::vector<double>& image, int width, int height,
                 const std::string& text) override;

    class Transport;

private:
    std::string roundtrip(const std::string& request_line, uint64_t id);

    BridgeConfig cfg_;
    std::unique_ptr<Transport> transport_;
    uint64_t next_id_ = 1;
};

}  // namespace layl
