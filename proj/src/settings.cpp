#include "lcf/settings.hpp"

#include <cerrno>
#include <cstdlib>

namespace lcf {

Settings& settings() {
    static Settings s;
    return s;
}

void load_settings_from_env() {
    const char* raw = std::getenv("LCF_MAX_SUBSETS");
    if (!raw || !*raw) return;
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(raw, &end, 10);
    if (errno == 0 && end && *end == '\0' && v > 0) settings().max_subsets = static_cast<std::size_t>(v);
}

} // namespace lcf
