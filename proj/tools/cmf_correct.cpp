#include "cmf/app.hpp"

int main(int argc, char** argv) { return cmf::app::main(argc, argv); }
