# Chain-core module
