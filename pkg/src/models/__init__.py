# Models and oracles module
