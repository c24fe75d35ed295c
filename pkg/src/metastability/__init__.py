# Metastability module
