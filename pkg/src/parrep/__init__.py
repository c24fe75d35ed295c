# ParRep engine module
