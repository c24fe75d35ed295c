# ParRep for metastable Markov chains
