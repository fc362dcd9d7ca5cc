#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

// Scratch directory removed at scope exit.
class TempDir {
public:
    TempDir() {
        std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("udfvol_test_" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& rel) const { return (path_ / rel).string(); }

private:
    std::filesystem::path path_;
};

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

#ifdef UDFVOL_TOOL_PATH
// Runs the command line tool; returns its exit code, captures stdout/stderr.
inline int run_tool(const std::string& args, const TempDir& dir, std::string* out = nullptr,
                    std::string* err = nullptr) {
    const std::string out_path = dir.str("cli_stdout.txt");
    const std::string err_path = dir.str("cli_stderr.txt");
    const std::string cmd =
        std::string(UDFVOL_TOOL_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
    int rc = std::system(cmd.c_str());
    if (out) *out = read_text_file(out_path);
    if (err) *err = read_text_file(err_path);
    return rc == -1 ? -1 : WEXITSTATUS(rc);
}
#endif
