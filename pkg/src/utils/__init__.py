# Configuration and error utilities module
