#include "stdepth/io_util.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stdepth/common.hpp"

namespace stdepth {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    SD_FAIL_IF(!in, "cannot open " << path << " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    SD_FAIL_IF(in.bad(), "read error on " << path);
    return std::move(ss).str();
}

void atomic_write_file(const std::string& path, const std::string& bytes) {
    const std::filesystem::path target(path);
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        SD_FAIL_IF(!out, "cannot open " << tmp.string() << " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        SD_FAIL_IF(!out, "short write to " << tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    SD_FAIL_IF(ec, "rename " << tmp.string() << " -> " << path << " failed: " << ec.message());
}

}  // namespace stdepth
