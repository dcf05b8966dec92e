#include "tg/session.hpp"

int main(int argc, char** argv) { return tg::run_synth_cli(argc, argv); }
