// Prints the parse tree of a Solidity file as an S-expression.
#include <fstream>
#include <iostream>
#include <sstream>

#include "forge/frontend/ast.hpp"

int main(int argc, char** argv) {
    std::stringstream buf;
    if (argc > 1) {
        std::ifstream in(argv[1], std::ios::binary);
        buf << in.rdbuf();
    } else {
        buf << std::cin.rdbuf();
    }
    try {
        auto ast = forge::sol::parse_source(buf.str());
        std::cout << forge::sol::dump(ast.root) << '\n';
        return ast.clean ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
}
