#include "mergelab/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mergelab {

void write_checkpoint(const ParamVector& params, const std::string& path) {
    check_finite(params, "write_checkpoint");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_checkpoint: cannot open " + path);
    os.write("MMCK", 4);
    uint16_t version = 1;
    os.write(reinterpret_cast<const char*>(&version), 2);
    os.write(reinterpret_cast<const char*>(params.spec_hash.data()), 32);
    uint64_t m = params.values.size();
    os.write(reinterpret_cast<const char*>(&m), 8);
    os.write(reinterpret_cast<const char*>(params.values.data()),
             static_cast<std::streamsize>(m * 8));
    Digest256 footer = Sha256::digest(params.values.data(), m * 8);
    os.write(reinterpret_cast<const char*>(footer.data()), 32);
    if (!os) throw std::runtime_error("write_checkpoint: write failed for " + path);
}

ParamVector read_checkpoint(const std::string& path, const ModelSpec* expected_spec) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "MMCK", 4) != 0)
        throw std::runtime_error("read_checkpoint: bad magic in " + path);
    uint16_t version;
    is.read(reinterpret_cast<char*>(&version), 2);
    if (version != 1) throw std::runtime_error("read_checkpoint: unsupported version");
    ParamVector p;
    is.read(reinterpret_cast<char*>(p.spec_hash.data()), 32);
    uint64_t m;
    is.read(reinterpret_cast<char*>(&m), 8);
    p.values.resize(m);
    is.read(reinterpret_cast<char*>(p.values.data()), static_cast<std::streamsize>(m * 8));
    Digest256 footer;
    is.read(reinterpret_cast<char*>(footer.data()), 32);
    if (!is) throw std::runtime_error("read_checkpoint: truncated file " + path);
    if (footer != Sha256::digest(p.values.data(), m * 8))
        throw std::runtime_error("read_checkpoint: payload digest mismatch in " + path);
    if (expected_spec) {
        if (p.spec_hash != expected_spec->layout_hash())
            throw std::runtime_error("read_checkpoint: spec hash mismatch in " + path);
        if (m != param_count(*expected_spec))
            throw std::runtime_error("read_checkpoint: parameter count mismatch in " + path);
    }
    check_finite(p, "read_checkpoint(" + path + ")");
    return p;
}

std::string checkpoint_digest(const ParamVector& params) {
    return Sha256::hex(Sha256::digest(params.values.data(), params.values.size() * 8));
}

} // namespace mergelab
