#pragma once

#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace test {

inline int g_failures = 0;

inline void run_test(const std::string& name, const std::function<void()>& fn) {
    try {
        fn();
        std::cout << "[PASS] " << name << std::endl;
    } catch (const std::exception& e) {
        std::cerr << "[FAIL] " << name << ": " << e.what() << std::endl;
        ++g_failures;
    } catch (...) {
        std::cerr << "[FAIL] " << name << ": unknown error" << std::endl;
        ++g_failures;
    }
}

inline int finish() {
    if (g_failures != 0) {
        std::cerr << g_failures << " test(s) failed" << std::endl;
        return 1;
    }
    std::cout << "all tests passed" << std::endl;
    return 0;
}

inline void check(bool condition, const std::string& message) {
    if (!condition) {
        throw std::runtime_error(message);
    }
}

inline void check_close(double actual, double expected, double tol,
                        const std::string& message) {
    if (!(std::abs(actual - expected) <= tol)) {
        std::ostringstream os;
        os.precision(17);
        os << message << ": expected " << expected << ", got " << actual
           << " (tol " << tol << ")";
        throw std::runtime_error(os.str());
    }
}

inline void check_eq(long long actual, long long expected, const std::string& message) {
    if (actual != expected) {
        std::ostringstream os;
        os << message << ": expected " << expected << ", got " << actual;
        throw std::runtime_error(os.str());
    }
}

template <typename Exception, typename Fn>
void check_throws(Fn&& fn, const std::string& message) {
    try {
        fn();
    } catch (const Exception&) {
        return;
    } catch (const std::exception& e) {
        throw std::runtime_error(message + ": wrong exception type (" + e.what() + ")");
    }
    throw std::runtime_error(message + ": no exception thrown");
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw std::runtime_error("max_abs_diff: length mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst;
}

} // namespace test
