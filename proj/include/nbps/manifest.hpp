#ifndef NBPS_MANIFEST_HPP
#define NBPS_MANIFEST_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>

#include "error.hpp"
#include "version.hpp"

namespace nbps {

namespace detail {

inline std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}

/// Declarative description of one run: model, configuration, and input file
/// digests. The hash is embedded in every output file so artifacts can be
/// traced back to the exact invocation.
struct RunManifest {
    std::map<std::string, std::string> fields;

    void set(const std::string& key, const std::string& value) { fields[key] = value; }

    void set_file(const std::string& key, const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw SchemaError("cannot open input file: " + path);
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        fields[key] = path;
        char digest[24];
        std::snprintf(digest, sizeof(digest), "%016llx",
                      static_cast<unsigned long long>(detail::fnv1a(content)));
        fields[key + ".digest"] = digest;
    }

    std::string hash() const {
        std::uint64_t h = detail::fnv1a(std::string("nbps/") + tool_version);
        for (const auto& [key, value] : fields) {
            h = detail::fnv1a(key + "=" + value + "\n", h);
        }
        char out[24];
        std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
        return out;
    }
};

}

#endif
