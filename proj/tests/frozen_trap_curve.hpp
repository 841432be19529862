#pragma once

// Frozen reference trapping times for the power grid 0.02..3.0 uW (50 points),
// computed with an independent dense-grid evaluation of the empirical
// trapping-time model before this library was written.  Zero = untrapped.

static const double kTrapCurveTau_dc1[50] = {0, 0.066929501842662914, 0.26626878288214134, 0.4620211512154645, 0.65427557505875877, 0.84311812269897857, 1.0286320796290211, 1.2108980600509645, 1.3899941130608333, 1.5659958238085283, 1.7389764099081331, 1.9090068133567799, 2.076155788204284, 2.2404899842009738, 2.4020740266373313, 2.5609705925761883, 2.7172404836662145, 2.8709426957142368, 3.022134485183487, 3.170871432775058, 3.3172075042407609, 3.4611951085670256, 3.6028851536614708, 3.7423270996663107, 3.8795690100157758, 4.0146576003481078, 4.1476382853766047, 4.278555223818362, 4.4074513614739859, 4.5343684725464293, 4.6593471992823767, 4.7824270900150729, 4.9036466356833275, 5.0230433048973868, 5.1406535776187399, 5.2565129775173149, 5.370656103066298, 5.4831166574316317, 5.5939274772103884, 5.7031205600693591, 5.8107270913327129, 5.9167774695649769, 6.0213013311934303, 6.1243275742116516, 6.2258843810040556, 6.3259992403291303, 6.4246989684974061, 6.5220097297783068, 6.6179570560684855, 6.7125658658525902};
static const double kTrapCurveTau_dc2[50] = {0, 0.027341377422042994, 0.16164402789498705, 0.29394422003581033, 0.42428225653058199, 0.55269737728203105, 0.67922779416786538, 0.80391072444403522, 0.926782422854178, 1.0478782125033301, 1.1672325145510341, 1.2848788767761827, 1.4008500010632936, 1.515177769857434, 1.6278932716326615, 1.739026825416625, 1.8486080044118955, 1.9566656587525835, 2.0632279374329725, 2.1683223094430746, 2.2719755841443932, 2.3742139309175574, 2.4750628981120042, 2.5745474313264696, 2.6726918910476769, 2.7695200696733981, 2.8650552079447529, 2.9593200108115836, 3.0523366627535506, 3.1441268425786344, 3.234711737719699, 3.3241120580488923, 3.412348049228735, 3.4994395056179126, 3.5854057827490311, 3.6702658093947753, 3.7540380992382505, 3.8367407621625484, 3.9183915151739721, 3.9990076929727016, 4.0786062581841103, 4.1572038112633676, 4.2348166000854413, 4.3114605292320993, 4.3871511689869997, 4.4619037640495396, 4.535733241977673, 4.6086542213694424, 4.6806810197926536, 4.7518276614716815};
static const double kTrapCurveTau_dc3[50] = {0, 0, 0.057938467032694792, 0.12870502731837485, 0.19881956794016695, 0.26829003342035396, 0.33712424188987927, 0.4053298875854992, 0.47291454328798715, 0.5398856627030082, 0.60625058278622601, 0.67201652601416573, 0.73719060260229696, 0.80177981267177101, 0.86579104836618292, 0.9292310959197071, 0.99210663767790019, 1.0544242540724329, 1.1161904255509638, 1.1774115344633536, 1.2380938669053521, 1.2982436145208833, 1.3578668762640038, 1.416969660121586, 1.4755578847977435, 1.5336373813609798, 1.5912138948550316, 1.6482930858743232, 1.7048805321049481, 1.7609817298320449, 1.8166020954144191, 1.8717469667272533, 1.9264216045736871, 1.9806311940660595, 2.0343808459775747, 2.0876755980651147, 2.1405204163639295, 2.1929201964548906, 2.2448797647049821, 2.296403879481697, 2.3474972323419654, 2.3981644491962428, 2.4484100914483538, 2.4982386571116915, 2.5476545819023291, 2.5966622403096071, 2.6452659466447312, 2.6934699560679101, 2.7412784655945428, 2.7886956150809428};
