# Statistical metrics module
